from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from .mesh import TriangleMesh, merge_meshes, normalize_mesh

SHAPE_CLASSES = ("box", "sphere", "cylinder", "cone", "capsule", "chair", "table")
CLASS_ALIASES = {"chair-composite": "chair", "table-composite": "table"}

# Parameter ranges (low, high) per class; `legs` is drawn as an integer.
DEFAULT_RANGES: Dict[str, Dict[str, Tuple[float, float]]] = {
    "box": {"width": (0.3, 1.0), "depth": (0.3, 1.0), "height": (0.3, 1.0)},
    "sphere": {"radius": (0.5, 1.0)},
    "cylinder": {"radius": (0.2, 0.5), "height": (0.5, 1.5)},
    "cone": {"radius": (0.2, 0.6), "height": (0.5, 1.5)},
    "capsule": {"radius": (0.15, 0.4), "height": (0.4, 1.2)},
    "chair": {
        "seat_width": (0.4, 0.6), "seat_depth": (0.4, 0.6), "seat_thickness": (0.03, 0.08),
        "seat_height": (0.35, 0.5), "back_height": (0.3, 0.6), "back_thickness": (0.03, 0.08),
        "leg_width": (0.03, 0.07), "legs": (4, 4),
    },
    "table": {
        "top_width": (0.6, 1.2), "top_depth": (0.4, 0.8), "top_thickness": (0.03, 0.08),
        "height": (0.4, 0.8), "leg_width": (0.03, 0.08), "legs": (4, 4),
    },
}


@dataclass(frozen=True)
class ProceduralSpec:
    """
    Recipe for one procedural shape.

    Attributes:
        shape_class: One of SHAPE_CLASSES (or an alias such as "chair-composite").
        ranges: Overrides of the class parameter ranges, name -> (low, high).
        seed: Seed for drawing parameters inside the ranges.
        segments: Tessellation resolution of round primitives.
    """
    shape_class: str
    ranges: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    seed: int = 0
    segments: int = 24

    def __post_init__(self):
        shape_class = CLASS_ALIASES.get(self.shape_class, self.shape_class)
        if shape_class not in SHAPE_CLASSES:
            raise ValueError(f"Unknown shape class: {self.shape_class}")
        object.__setattr__(self, "shape_class", shape_class)
        unknown = set(self.ranges) - set(DEFAULT_RANGES[shape_class])
        if unknown:
            raise ValueError(f"Unknown parameters for {shape_class}: {sorted(unknown)}")
        for name, (low, high) in self.resolved_ranges().items():
            if not (np.isfinite(low) and np.isfinite(high)) or low <= 0 or high < low:
                raise ValueError(f"Invalid range for {name}: ({low}, {high})")
        if shape_class in ("chair", "table"):
            low, high = self.resolved_ranges()["legs"]
            if low < 3 or high > 4 or int(low) != low or int(high) != high:
                raise ValueError(f"Leg count range must be integers within [3, 4], got ({low}, {high})")
        if self.segments < 3:
            raise ValueError(f"segments must be >= 3, got {self.segments}")

    @property
    def class_id(self) -> int:
        return SHAPE_CLASSES.index(self.shape_class)

    def resolved_ranges(self) -> Dict[str, Tuple[float, float]]:
        merged = dict(DEFAULT_RANGES[self.shape_class])
        merged.update({k: tuple(v) for k, v in self.ranges.items()})
        return merged

    def draw_params(self) -> Dict[str, float]:
        rng = np.random.default_rng(self.seed)
        params = {}
        for name, (low, high) in sorted(self.resolved_ranges().items()):
            if name == "legs":
                params[name] = int(rng.integers(int(low), int(high) + 1))
            else:
                params[name] = float(rng.uniform(low, high)) if high > low else float(low)
        return params


def cuboid(size, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    half = 0.5 * np.asarray(size, dtype=np.float64)
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64)
    faces = np.array([
        [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
        [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
        [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
    ])
    return TriangleMesh(corners * half + np.asarray(center, dtype=np.float64), faces)


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [[-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
                [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
                [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1]]
    faces = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
             [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
             [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
             [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    vertices = [list(np.asarray(v, dtype=np.float64) / np.linalg.norm(v)) for v in vertices]

    for _ in range(subdivisions):
        midpoints = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoints:
                m = np.add(vertices[i], vertices[j]) / 2.0
                vertices.append(list(m / np.linalg.norm(m)))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = refined

    return TriangleMesh(np.asarray(vertices) * radius, np.asarray(faces))


def _revolved(profile, segments: int) -> TriangleMesh:
    """
    Surface of revolution around the z axis from a (radius, z) profile.

    Profile endpoints with radius 0 become single pole vertices.
    """
    angles = 2.0 * np.pi * np.arange(segments) / segments
    vertices, rings = [], []
    for radius, z in profile:
        if radius == 0.0:
            rings.append([len(vertices)])
            vertices.append([0.0, 0.0, z])
        else:
            rings.append(list(range(len(vertices), len(vertices) + segments)))
            vertices += [[radius * np.cos(a), radius * np.sin(a), z] for a in angles]

    faces = []
    for lower, upper in zip(rings[:-1], rings[1:]):
        for s in range(segments):
            t = (s + 1) % segments
            if len(lower) == 1:
                faces.append([lower[0], upper[t], upper[s]])
            elif len(upper) == 1:
                faces.append([lower[s], lower[t], upper[0]])
            else:
                faces += [[lower[s], lower[t], upper[t]], [lower[s], upper[t], upper[s]]]
    return TriangleMesh(np.asarray(vertices), np.asarray(faces))


def cylinder(radius: float, height: float, segments: int = 24) -> TriangleMesh:
    h = height / 2.0
    return _revolved([(0.0, -h), (radius, -h), (radius, h), (0.0, h)], segments)


def cone(radius: float, height: float, segments: int = 24) -> TriangleMesh:
    h = height / 2.0
    return _revolved([(0.0, -h), (radius, -h), (0.0, h)], segments)


def capsule(radius: float, height: float, segments: int = 24) -> TriangleMesh:
    rings = max(segments // 4, 2)
    lower = [(radius * np.sin(t), -height / 2.0 - radius * np.cos(t)) for t in np.linspace(0, np.pi / 2, rings + 1)]
    upper = [(radius * np.cos(t), height / 2.0 + radius * np.sin(t)) for t in np.linspace(0, np.pi / 2, rings + 1)]
    profile = [(0.0 if r < 1e-12 else r, z) for r, z in lower + upper]
    return _revolved(profile, segments)


def _leg_positions(count: int, width: float, depth: float, inset: float):
    if count == 4:
        return [(sx * (width / 2 - inset), sy * (depth / 2 - inset)) for sx in (-1, 1) for sy in (-1, 1)]
    # three legs: two at the back corners, one centered at the front
    return [(-(width / 2 - inset), depth / 2 - inset), (width / 2 - inset, depth / 2 - inset),
            (0.0, -(depth / 2 - inset))]


def _chair(p) -> TriangleMesh:
    w, d, t, h = p["seat_width"], p["seat_depth"], p["seat_thickness"], p["seat_height"]
    leg = p["leg_width"]
    parts = [cuboid((w, d, t), (0.0, 0.0, h + t / 2))]
    back_t = p["back_thickness"]
    parts.append(cuboid((w, back_t, p["back_height"]), (0.0, d / 2 - back_t / 2, h + t + p["back_height"] / 2)))
    for x, y in _leg_positions(p["legs"], w, d, leg / 2):
        parts.append(cuboid((leg, leg, h), (x, y, h / 2)))
    return merge_meshes(parts)


def _table(p) -> TriangleMesh:
    w, d, t, h = p["top_width"], p["top_depth"], p["top_thickness"], p["height"]
    leg = p["leg_width"]
    parts = [cuboid((w, d, t), (0.0, 0.0, h + t / 2))]
    for x, y in _leg_positions(p["legs"], w, d, leg / 2):
        parts.append(cuboid((leg, leg, h), (x, y, h / 2)))
    return merge_meshes(parts)


def gen_procedural_mesh(spec: ProceduralSpec) -> TriangleMesh:
    """
    Build the mesh described by a procedural spec.

    Parameters are drawn from the ProceduralSpec ranges with its seed, so equal
    (class, ranges, seed) give identical meshes; fixed ranges (low == high)
    give identical meshes for every seed. The result is normalized to a unit
    bounding-box diagonal centered at the origin.

    Args:
        spec (ProceduralSpec): Shape recipe.

    Returns:
        TriangleMesh: The normalized mesh.
    """
    p = spec.draw_params()
    if spec.shape_class == "box":
        mesh = cuboid((p["width"], p["depth"], p["height"]))
    elif spec.shape_class == "sphere":
        mesh = icosphere(subdivisions=2, radius=p["radius"])
    elif spec.shape_class == "cylinder":
        mesh = cylinder(p["radius"], p["height"], spec.segments)
    elif spec.shape_class == "cone":
        mesh = cone(p["radius"], p["height"], spec.segments)
    elif spec.shape_class == "capsule":
        mesh = capsule(p["radius"], p["height"], spec.segments)
    elif spec.shape_class == "chair":
        mesh = _chair(p)
    elif spec.shape_class == "table":
        mesh = _table(p)
    else:
        raise ValueError(f"Shape class: {spec.shape_class} not supported")
    return normalize_mesh(mesh)
