from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class TriangleMesh:
    """
    Triangle mesh with float64 vertices (V, 3) and int64 faces (F, 3).
    """
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError(f"Vertices must have shape (V, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3 or len(faces) == 0:
            raise ValueError(f"Faces must have shape (F, 3) with F >= 1, got {faces.shape}")
        if not np.isfinite(vertices).all():
            raise ValueError("Mesh has non-finite vertices")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise ValueError(f"Face indices must lie in [0, {len(vertices)})")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        if self.area <= 0.0:
            raise ValueError("Mesh has zero surface area")

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    @property
    def face_areas(self) -> np.ndarray:
        tri = self.triangles
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.sqrt(np.sum(cross * cross, axis=1))

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    def connected_components(self) -> int:
        """
        Number of vertex-connected components among the referenced vertices.
        """
        rows = np.concatenate([self.faces[:, 0], self.faces[:, 1], self.faces[:, 2]])
        cols = np.concatenate([self.faces[:, 1], self.faces[:, 2], self.faces[:, 0]])
        n = len(self.vertices)
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, labels = connected_components(graph, directed=False)
        return len(np.unique(labels[np.unique(self.faces)]))

    def transformed(self, scale: float, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices * scale + np.asarray(offset, dtype=np.float64), self.faces)


def merge_meshes(meshes) -> TriangleMesh:
    """
    Concatenate meshes into one mesh without welding vertices.
    """
    vertices, faces, offset = [], [], 0
    for mesh in meshes:
        vertices.append(mesh.vertices)
        faces.append(mesh.faces + offset)
        offset += len(mesh.vertices)
    return TriangleMesh(np.concatenate(vertices), np.concatenate(faces))


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """
    Center the bounding box at the origin and scale its diagonal to 1.
    """
    low, high = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    diagonal = float(np.linalg.norm(high - low))
    if diagonal == 0.0:
        raise ValueError("degenerate mesh")
    return TriangleMesh((mesh.vertices - 0.5 * (low + high)) / diagonal, mesh.faces)


def point_in_mesh_surface(mesh: TriangleMesh, point, tol: float = 1e-9) -> bool:
    """
    Check whether a point lies on one of the mesh triangles.
    """
    p = np.asarray(point, dtype=np.float64)
    for a, b, c in mesh.triangles:
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm == 0.0 or abs(np.dot(p - a, normal)) / norm > tol:
            continue
        v0, v1, v2 = c - a, b - a, p - a
        d00, d01, d02 = v0 @ v0, v0 @ v1, v0 @ v2
        d11, d12 = v1 @ v1, v1 @ v2
        denom = d00 * d11 - d01 * d01
        u = (d11 * d02 - d01 * d12) / denom
        v = (d00 * d12 - d01 * d02) / denom
        if u >= -tol and v >= -tol and u + v <= 1 + tol:
            return True
    return False
