import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from geometry.cloud import SPLITS, LabeledCloudSet, normalize_cloud
from geometry.io import read_xyz, write_xyz
from geometry.mesh import TriangleMesh
from geometry.procedural import ProceduralSpec, gen_procedural_mesh
from geometry.sampling import sample_biased_cluster, sample_fps, sample_mesh_uniform

from .dataloader import Dataloader

log = logging.getLogger(__name__)

REAL, FAKE = 1, 0
SAMPLERS = ("uniform", "fps", "biased")
MANIFEST = "manifest.json"
CATEGORY_SPLIT = (0.85, 0.05, 0.10)


@dataclass(frozen=True)
class NamedMesh:
    mesh_id: str
    shape_class: str
    mesh: TriangleMesh


def procedural_meshes(shape_class: str, count: int, rng: np.random.Generator, first_index: int = 0,
                      ranges=None) -> List[NamedMesh]:
    """
    Generate `count` procedural meshes of one class with consecutive ids.

    Args:
        shape_class: Class name.
        count: Number of meshes.
        rng: Stream drawing the base seed.
        first_index: Index of the first mesh id, used to keep id sets disjoint.
        ranges: Parameter range overrides.

    Returns:
        list of named meshes
    """
    base = int(rng.integers(0, 2 ** 31 - 1))
    meshes = []
    for i in range(first_index, first_index + count):
        spec = ProceduralSpec(shape_class, ranges or {}, seed=base + i)
        meshes.append(NamedMesh(f"{spec.shape_class}-{i:05d}", spec.shape_class, gen_procedural_mesh(spec)))
    return meshes


def sample_cloud(mesh: TriangleMesh, n: int, sampler: str, rng: np.random.Generator, radius: float = 0.1,
                 oversample: int = 8) -> np.ndarray:
    """
    Draw one n-point cloud from a mesh with a named sampler.

    uniform: area-weighted surface sample; fps: farthest points of an
    `oversample` x n uniform pre-sample; biased: n/2 uniform points plus
    n - n/2 points clustered within `radius` of a surface anchor.
    """
    if sampler == "uniform":
        return sample_mesh_uniform(mesh, n, rng)
    if sampler == "fps":
        dense = sample_mesh_uniform(mesh, oversample * n, rng)
        return sample_fps(dense, n, start=rng)
    if sampler == "biased":
        return sample_biased_cluster(mesh, n // 2, n - n // 2, radius, rng)
    raise ValueError(f"Sampler: {sampler} not supported")


def _real_fake_set(meshes: Sequence[NamedMesh], n: int, fake_sampler: str, split: str, rng, **kwargs) -> LabeledCloudSet:
    clouds, labels, ids = [], [], []
    for item in tqdm(meshes, desc=f"{split} ({fake_sampler})", leave=False):
        clouds.append(sample_cloud(item.mesh, n, "uniform", rng))
        labels.append(REAL)
        ids.append(item.mesh_id)
        clouds.append(sample_cloud(item.mesh, n, fake_sampler, rng, **kwargs))
        labels.append(FAKE)
        ids.append(item.mesh_id)
    return LabeledCloudSet(np.stack(clouds), np.array(labels), split, (FAKE, REAL), ids)


def build_clustering_dataset(train_meshes: Sequence[NamedMesh], test_meshes: Sequence[NamedMesh], n: int = 2048,
                             rng: Optional[np.random.Generator] = None,
                             radius: float = 0.1) -> Tuple[LabeledCloudSet, LabeledCloudSet]:
    """
    Real clouds are uniform samples; fake clouds carry a dense cluster
    (n/2 uniform points plus n/2 points within `radius` of a surface anchor).
    Every mesh yields one real and one fake cloud, so labels are balanced.
    """
    _check_disjoint(train_meshes, test_meshes)
    train = _real_fake_set(train_meshes, n, "biased", "train", rng, radius=radius)
    test = _real_fake_set(test_meshes, n, "biased", "test", rng, radius=radius)
    return train, test


def build_fps_vs_uniform_dataset(train_meshes: Sequence[NamedMesh], test_meshes: Sequence[NamedMesh], n: int = 2048,
                                 rng: Optional[np.random.Generator] = None,
                                 oversample: int = 8) -> Tuple[LabeledCloudSet, LabeledCloudSet]:
    """
    Real clouds are uniform samples; fake clouds are FPS subsets of a dense
    uniform pre-sample of the same shape.
    """
    _check_disjoint(train_meshes, test_meshes)
    train = _real_fake_set(train_meshes, n, "fps", "train", rng, oversample=oversample)
    test = _real_fake_set(test_meshes, n, "fps", "test", rng, oversample=oversample)
    return train, test


def _check_disjoint(a: Sequence[NamedMesh], b: Sequence[NamedMesh]) -> None:
    shared = {m.mesh_id for m in a} & {m.mesh_id for m in b}
    if shared:
        raise ValueError(f"Train and test meshes overlap: {sorted(shared)[:5]}")


def build_diagnostic_dataset(kind: str, shape_class: str, count: int, n: int,
                             rng: np.random.Generator) -> Tuple[LabeledCloudSet, LabeledCloudSet]:
    """
    Train/test real-vs-fake sets from 2 x count fresh procedural meshes.

    Args:
        kind: "clustering" or "fps".
        shape_class: Class of the meshes.
        count: Meshes per split.
        n: Points per cloud.
        rng: Data stream.
    """
    train_meshes = procedural_meshes(shape_class, count, rng, first_index=0)
    test_meshes = procedural_meshes(shape_class, count, rng, first_index=count)
    if kind == "clustering":
        return build_clustering_dataset(train_meshes, test_meshes, n, rng)
    if kind == "fps":
        return build_fps_vs_uniform_dataset(train_meshes, test_meshes, n, rng)
    raise ValueError(f"Dataset: {kind} not supported")


def build_category_dataset(classes: Sequence[str], per_class: int, n: int, rng: np.random.Generator,
                           split: Sequence[float] = CATEGORY_SPLIT) -> Dict[str, LabeledCloudSet]:
    """
    Multi-class uniform clouds, split per class into train/validation/test
    with the given fractions.
    """
    classes = [ProceduralSpec(c).shape_class for c in classes]
    if len(classes) < 2:
        raise ValueError("A category dataset needs at least 2 classes")
    if abs(sum(split) - 1.0) > 1e-9:
        raise ValueError(f"Split fractions must sum to 1, got {list(split)}")
    parts = {name: [] for name in SPLITS}
    label_set = tuple(range(len(classes)))
    for label, shape_class in enumerate(classes):
        meshes = procedural_meshes(shape_class, per_class, rng)
        clouds = np.stack([sample_mesh_uniform(m.mesh, n, rng) for m in meshes])
        n_val = int(round(split[1] * per_class))
        n_test = int(round(split[2] * per_class))
        n_train = per_class - n_val - n_test
        bounds = {"train": (0, n_train), "validation": (n_train, n_train + n_val),
                  "test": (n_train + n_val, per_class)}
        for name, (lo, hi) in bounds.items():
            if hi > lo:
                parts[name].append(LabeledCloudSet(clouds[lo:hi], np.full(hi - lo, label), name, label_set,
                                                   [m.mesh_id for m in meshes[lo:hi]]))
    return {name: LabeledCloudSet.concatenate(sets, name) for name, sets in parts.items() if sets}


def build_shape_set(shape_class: str, count: int, n: int, rng: np.random.Generator, sampler: str = "uniform",
                    first_index: int = 0) -> Tuple[np.ndarray, List[NamedMesh]]:
    """
    Clouds of `count` procedural meshes of one class, plus the meshes.
    """
    meshes = procedural_meshes(shape_class, count, rng, first_index)
    return np.stack([sample_cloud(m.mesh, n, sampler, rng) for m in meshes]), meshes


def resample_set(meshes: Sequence[NamedMesh], n: int, sampler: str, rng: np.random.Generator) -> np.ndarray:
    return np.stack([sample_cloud(m.mesh, n, sampler, rng) for m in meshes])


def write_cloud_dir(directory: str, clouds, names: Sequence[str], labels: Optional[Sequence[int]] = None,
                    extra: Optional[dict] = None) -> str:
    """
    Write clouds as XYZ files plus a manifest JSON.
    """
    os.makedirs(directory, exist_ok=True)
    entries = []
    for i, (cloud, name) in enumerate(zip(clouds, names)):
        filename = f"{name}.xyz"
        write_xyz(os.path.join(directory, filename), cloud)
        entry = {"file": filename, "points": int(len(cloud))}
        if labels is not None:
            entry["label"] = int(labels[i])
        entries.append(entry)
    manifest = {"format": "xyz", "count": len(entries), "clouds": entries, **(extra or {})}
    path = os.path.join(directory, MANIFEST)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def read_cloud_dir(directory: str, normalize: bool = False) -> Tuple[np.ndarray, List[str], Optional[np.ndarray]]:
    """
    Read every cloud of a directory (manifest order when present, sorted
    file names otherwise).

    Raises:
        ValueError: When the clouds do not all have the same point count,
            naming each offending file.
    """
    manifest_path = os.path.join(directory, MANIFEST)
    labels = None
    if os.path.exists(manifest_path):
        with open(manifest_path) as f:
            manifest = json.load(f)
        files = [e["file"] for e in manifest["clouds"]]
        if all("label" in e for e in manifest["clouds"]):
            labels = np.array([e["label"] for e in manifest["clouds"]])
    else:
        files = sorted(f for f in os.listdir(directory) if f.endswith(".xyz"))
    if not files:
        raise ValueError(f"No clouds in {directory}")
    clouds = [read_xyz(os.path.join(directory, f)) for f in files]
    if normalize:
        clouds = [normalize_cloud(c) for c in clouds]
    counts = [len(c) for c in clouds]
    expected = max(set(counts), key=counts.count)
    bad = [f"{f} ({c} points)" for f, c in zip(files, counts) if c != expected]
    if bad:
        raise ValueError(f"Mismatched point counts in {directory}, expected {expected}: {', '.join(bad)}")
    return np.stack(clouds), [os.path.splitext(f)[0] for f in files], labels


class CloudDirectoryDataloader(Dataloader):
    """
    Serves a directory written by the gen-data command.
    """

    def __init__(self, data_path, split="train", batch_size=16, shuffle=True, label_set=None):
        super().__init__(data_path, split, batch_size, shuffle)
        self.label_set = label_set

    def load(self) -> LabeledCloudSet:
        clouds, names, labels = read_cloud_dir(self.data_path)
        if labels is None:
            labels = np.full(len(clouds), REAL)
        label_set = tuple(self.label_set) if self.label_set is not None else tuple(sorted(set(labels.tolist())))
        return LabeledCloudSet(clouds, labels, self.split, label_set, names)
