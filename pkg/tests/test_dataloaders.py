import json
import os

import numpy as np
import pytest

from dataloaders.clouds import (FAKE, REAL, CloudDirectoryDataloader, build_category_dataset,
                                build_diagnostic_dataset, build_shape_set, procedural_meshes, read_cloud_dir,
                                sample_cloud, write_cloud_dir)
from dataloaders.dataloader import BatchLoader
from geometry.cloud import LabeledCloudSet
from geometry.io import write_xyz


def test_diagnostic_dataset_is_balanced_and_disjoint(rng):
    train, test = build_diagnostic_dataset("clustering", "box", 4, 64, rng)
    assert len(train) == len(test) == 8
    assert train.labels.tolist().count(REAL) == train.labels.tolist().count(FAKE) == 4
    assert not set(train.mesh_ids) & set(test.mesh_ids)
    assert train.clouds.shape == (8, 64, 3)


def test_fps_dataset(rng):
    train, test = build_diagnostic_dataset("fps", "sphere", 2, 32, rng)
    assert train.split == "train" and test.split == "test"
    assert set(train.labels.tolist()) == {REAL, FAKE}


def test_unknown_dataset(rng):
    with pytest.raises(ValueError, match="not supported"):
        build_diagnostic_dataset("noise", "box", 2, 16, rng)


def test_procedural_ids_are_consecutive(rng):
    meshes = procedural_meshes("cone", 3, rng, first_index=10)
    assert [m.mesh_id for m in meshes] == ["cone-00010", "cone-00011", "cone-00012"]


def test_samplers(rng, chair_mesh):
    for sampler in ("uniform", "fps", "biased"):
        assert sample_cloud(chair_mesh, 33, sampler, rng).shape == (33, 3)
    with pytest.raises(ValueError):
        sample_cloud(chair_mesh, 33, "poisson", rng)


def test_category_split(rng):
    data = build_category_dataset(["box", "sphere"], 20, 16, rng)
    assert len(data["train"]) == 34 and len(data["validation"]) == 2 and len(data["test"]) == 4
    assert data["train"].label_set == (0, 1)
    assert not set(data["train"].mesh_ids) & set(data["test"].mesh_ids)


def test_shape_set_is_seeded():
    a, _ = build_shape_set("table", 2, 16, np.random.default_rng(3))
    b, _ = build_shape_set("table", 2, 16, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_cloud_dir_round_trip(tmp_path, rng):
    clouds = rng.random((3, 10, 3))
    write_cloud_dir(str(tmp_path), clouds, ["b", "a", "c"], labels=[0, 1, 0], extra={"seed": 5})
    back, names, labels = read_cloud_dir(str(tmp_path))
    assert names == ["b", "a", "c"]
    assert np.array_equal(back, clouds)
    assert labels.tolist() == [0, 1, 0]
    with open(tmp_path / "manifest.json") as f:
        assert json.load(f)["seed"] == 5


def test_cloud_dir_names_mismatched_files(tmp_path, rng):
    for name, n in (("a", 10), ("b", 10), ("c", 7)):
        write_xyz(os.path.join(tmp_path, f"{name}.xyz"), rng.random((n, 3)))
    with pytest.raises(ValueError, match=r"c\.xyz \(7 points\)"):
        read_cloud_dir(str(tmp_path))


def test_directory_dataloader(tmp_path, rng):
    write_cloud_dir(str(tmp_path), rng.random((5, 8, 3)), [f"s{i}" for i in range(5)])
    loader = CloudDirectoryDataloader(str(tmp_path), batch_size=2).create_dataloader(rng)
    batches = list(loader)
    assert len(loader) == 3
    assert [len(x) for x, _ in batches] == [2, 2, 1]
    assert all((y == REAL).all() for _, y in batches)


def test_batch_loader_is_reproducible():
    data = LabeledCloudSet(np.arange(7 * 2 * 3, dtype=float).reshape(7, 2, 3), np.zeros(7, dtype=int))
    first = [x.copy() for x, _ in BatchLoader(data, 3, rng=np.random.default_rng(1), drop_last=True)]
    second = [x.copy() for x, _ in BatchLoader(data, 3, rng=np.random.default_rng(1), drop_last=True)]
    assert len(first) == 2
    assert all(np.array_equal(a, b) for a, b in zip(first, second))


def test_batch_loader_needs_rng_to_shuffle():
    data = LabeledCloudSet(np.zeros((2, 2, 3)), np.zeros(2, dtype=int))
    with pytest.raises(ValueError):
        BatchLoader(data, 1)
