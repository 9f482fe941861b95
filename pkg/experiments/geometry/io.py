import os

import numpy as np
from matplotlib.colors import LinearSegmentedColormap

from .cloud import as_cloud
from .density import DensityField
from .mesh import TriangleMesh

# sparse -> dense
DENSITY_COLORMAP = LinearSegmentedColormap.from_list("density", ["#0b1a5c", "#fff7a8"])


def write_xyz(path: str, cloud) -> None:
    """
    Write a cloud as one "x y z" line per point with round-trip precision.
    """
    cloud = as_cloud(cloud)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for x, y, z in cloud:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")


def read_xyz(path: str) -> np.ndarray:
    """
    Read an XYZ file; blank lines are skipped.

    Raises:
        ValueError: On a malformed line, naming the file and line number.
    """
    points = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 coordinates, got {len(fields)}")
            try:
                points.append([float(v) for v in fields])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed coordinate in {line.strip()!r}") from None
    if not points:
        raise ValueError(f"{path}: no points")
    try:
        return as_cloud(points)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None


def density_colors(field: DensityField) -> np.ndarray:
    """
    Map densities linearly over their min-max range onto the dark blue to
    light yellow ramp. Returns uint8 RGB rows.
    """
    values = field.values.astype(np.float64)
    span = values.max() - values.min()
    ramp = (values - values.min()) / span if span > 0 else np.zeros_like(values)
    return np.round(DENSITY_COLORMAP(ramp)[:, :3] * 255.0).astype(np.uint8)


def write_ply(path: str, cloud, colors=None) -> None:
    """
    Write an ASCII PLY point cloud, optionally with per-vertex RGB.
    """
    cloud = as_cloud(cloud)
    if colors is not None and len(colors) != len(cloud):
        raise ValueError(f"{len(colors)} colors for {len(cloud)} points")
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
              "property double x", "property double y", "property double z"]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(header) + "\n")
        for i, (x, y, z) in enumerate(cloud):
            row = f"{x:.17g} {y:.17g} {z:.17g}"
            if colors is not None:
                r, g, b = colors[i]
                row += f" {int(r)} {int(g)} {int(b)}"
            f.write(row + "\n")


def read_ply_colors(path: str):
    """
    Read back the vertices and RGB colors of an ASCII PLY written by write_ply.
    """
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    end = lines.index("end_header")
    rows = np.array([line.split() for line in lines[end + 1:]], dtype=np.float64)
    return rows[:, :3], rows[:, 3:6].astype(np.uint8) if rows.shape[1] >= 6 else None


def _fan(indices):
    return [[indices[0], indices[i], indices[i + 1]] for i in range(1, len(indices) - 1)]


def read_off(path: str) -> TriangleMesh:
    with open(path, "r") as f:
        tokens = [line.split("#")[0].split() for line in f]
    lines = [t for t in tokens if t]
    if not lines or not lines[0][0].startswith("OFF"):
        raise ValueError(f"{path}: missing OFF header")
    head = lines[0][1:] if len(lines[0]) > 1 else lines[1]
    start = 1 if len(lines[0]) > 1 else 2
    n_vertices, n_faces = int(head[0]), int(head[1])
    vertices = np.array([[float(v) for v in line[:3]] for line in lines[start:start + n_vertices]])
    faces = []
    for line in lines[start + n_vertices:start + n_vertices + n_faces]:
        count = int(line[0])
        faces += _fan([int(v) for v in line[1:1 + count]])
    return TriangleMesh(vertices, np.asarray(faces))


def read_obj(path: str) -> TriangleMesh:
    vertices, faces = [], []
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.split()
            if not fields:
                continue
            if fields[0] == "v":
                vertices.append([float(v) for v in fields[1:4]])
            elif fields[0] == "f":
                # "f v/vt/vn" entries are 1-based, negatives count from the end
                indices = []
                for entry in fields[1:]:
                    idx = int(entry.split("/")[0])
                    indices.append(idx - 1 if idx > 0 else len(vertices) + idx)
                if len(indices) < 3:
                    raise ValueError(f"{path}:{lineno}: face with fewer than 3 vertices")
                faces += _fan(indices)
    return TriangleMesh(np.asarray(vertices), np.asarray(faces))


def read_mesh(path: str) -> TriangleMesh:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        return read_off(path)
    if ext == ".obj":
        return read_obj(path)
    raise ValueError(f"Unsupported mesh format: {ext}")


def write_off(path: str, mesh: TriangleMesh) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(f"OFF\n{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for x, y, z in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.faces:
            f.write(f"3 {a} {b} {c}\n")
