"""Indexed triangle meshes and their file formats."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import EmptyMeshError, MeshIOError

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12  # m^2
STL_UNIT_TAG = b"units=mm"


@dataclass(eq=False)
class TriMesh:
    """Triangle surface in meters. Derived quantities are cached; treat as immutable."""

    vertices: np.ndarray
    triangles: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle index out of range")

    def __len__(self):
        return len(self.triangles)

    @cached_property
    def _cross(self):
        v = self.vertices[self.triangles]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        n = self._cross
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(norm > 0, n / norm, 0.0)

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        # summing raw cross products weights each face by twice its area
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], self._cross)
        norm = np.linalg.norm(acc, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(norm > 0, acc / norm, 0.0)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def volume(self) -> float:
        """Signed enclosed volume; meaningful only for closed, consistently oriented meshes."""
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @cached_property
    def edges_unique(self):
        """``(edges, counts)`` of undirected edges."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0, return_counts=True)

    @property
    def is_watertight(self) -> bool:
        if not len(self.triangles):
            return False
        return bool(np.all(self.edges_unique[1] == 2))

    @property
    def is_oriented(self) -> bool:
        """Every directed edge appears at most once (consistent winding)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return len(np.unique(e, axis=0)) == len(e)

    @property
    def mean_edge_length(self) -> float:
        e = self.edges_unique[0]
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    def boundary_edges(self, faces=None) -> np.ndarray:
        """Directed boundary edges ``(a, b)`` of ``faces`` in their face winding."""
        t = self.triangles if faces is None else self.triangles[np.asarray(faces)]
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        undirected = np.sort(directed, axis=1)
        _, inv, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
        return directed[counts[inv.ravel()] == 1]

    def face_components(self, faces=None) -> np.ndarray:
        """Connected-component label per face (edge adjacency) for ``faces``."""
        idx = np.arange(len(self.triangles)) if faces is None else np.asarray(faces)
        t = self.triangles[idx]
        n = len(t)
        if n == 0:
            return np.empty(0, dtype=np.int64)
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        owner = np.tile(np.arange(n), 3)
        _, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.ravel()
        # faces sharing an edge key are adjacent; link each to the first owner of the key
        order = np.argsort(inv, kind="stable")
        keys = inv[order]
        first = np.r_[True, keys[1:] != keys[:-1]]
        lead = np.maximum.accumulate(np.where(first, np.arange(len(keys)), 0))
        rows, cols = owner[order], owner[order][lead]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        return connected_components(adj, directed=False)[1]

    def submesh(self, faces) -> "TriMesh":
        """Faces ``faces`` with unused vertices removed; ``meta['vertex_map']`` maps back."""
        t = self.triangles[np.asarray(faces)]
        used, inv = np.unique(t, return_inverse=True)
        return TriMesh(self.vertices[used], inv.reshape(-1, 3), meta={"vertex_map": used})

    def flipped(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.triangles[:, ::-1].copy())


def clean_mesh(mesh: TriMesh, weld: bool = False) -> tuple[TriMesh, int]:
    """Drop degenerate triangles and unreferenced vertices; optionally weld equal vertices.

    Returns the cleaned mesh and the number of triangles dropped.
    """
    v, t = mesh.vertices, mesh.triangles
    if weld and len(v):
        v, inv = np.unique(v, axis=0, return_inverse=True)
        t = inv.ravel()[t]
    repeat = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
    tri = v[t]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    keep = ~repeat & (area >= DEGENERATE_AREA)
    t = t[keep]
    if len(t):
        used, inv = np.unique(t, return_inverse=True)
        v, t = v[used], inv.reshape(-1, 3)
    else:
        v = v[:0]
    return TriMesh(v, t), int((~keep).sum())


# --- readers ------------------------------------------------------------


def _parse_obj(text: str):
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
        except ValueError as exc:
            raise MeshIOError(f"malformed OBJ record at line {lineno}: {line!r}") from exc
    return np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _parse_stl_binary(data: bytes):
    n = struct.unpack_from("<I", data, 80)[0]
    rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    arr = np.frombuffer(data, dtype=rec, count=n, offset=84)
    tri = arr["v"].astype(np.float64).reshape(-1, 3)
    scale = 1e-3 if STL_UNIT_TAG in data[:80] else 1.0
    return tri * scale, np.arange(3 * n, dtype=np.int64).reshape(-1, 3)


def _parse_stl_ascii(text: str):
    pts = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            pts.append([float(x) for x in parts[1:4]])
    if len(pts) % 3:
        raise MeshIOError("ASCII STL vertex count is not a multiple of 3")
    return np.array(pts, dtype=np.float64).reshape(-1, 3), np.arange(len(pts)).reshape(-1, 3)


def load_mesh(path) -> TriMesh:
    """Read an OBJ or STL file into a cleaned, welded ``TriMesh`` (meters).

    STL files written by :func:`write_stl` carry a millimeter tag in the header
    and are scaled back; other STL files are taken to be in meters.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MeshIOError(f"cannot read {path}: {exc}") from exc
    suffix = path.suffix.lower()
    try:
        if suffix == ".obj":
            v, t = _parse_obj(data.decode("utf-8", errors="replace"))
        elif suffix == ".stl":
            if len(data) >= 84 and len(data) == 84 + 50 * struct.unpack_from("<I", data, 80)[0]:
                v, t = _parse_stl_binary(data)
            elif data.lstrip().startswith(b"solid"):
                v, t = _parse_stl_ascii(data.decode("ascii", errors="replace"))
            else:
                raise MeshIOError(f"{path}: truncated or malformed STL")
        else:
            raise MeshIOError(f"unsupported mesh format {suffix!r} (expected .obj or .stl)")
        mesh = TriMesh(v, t)
    except ValueError as exc:
        raise MeshIOError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(mesh.vertices)):
        raise MeshIOError(f"{path}: non-finite vertex coordinates")
    mesh, dropped = clean_mesh(mesh, weld=True)
    if dropped:
        log.warning("%s: dropped %d degenerate triangles", path, dropped)
    if not len(mesh):
        raise EmptyMeshError(f"{path}: empty mesh")
    mesh.meta["dropped_degenerate"] = dropped
    return mesh


# --- writers ------------------------------------------------------------


def write_stl(mesh: TriMesh, path, comment: str = "") -> None:
    """Binary STL in millimeters; the 80-byte header records the unit."""
    header = (STL_UNIT_TAG + b" skinkit " + comment.encode("ascii", "replace"))[:80].ljust(80, b" ")
    rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    arr = np.zeros(len(mesh.triangles), dtype=rec)
    arr["n"] = mesh.face_normals
    arr["v"] = mesh.vertices[mesh.triangles] * 1e3
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", len(arr)))
        fh.write(arr.tobytes())


def write_obj(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in (mesh.triangles + 1).tolist():
            fh.write(f"f {a} {b} {c}\n")


def write_ply_mesh(mesh: TriMesh, path, comments=()) -> None:
    """ASCII PLY with vertex and face elements (meters)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        for c in comments:
            fh.write(f"comment {c}\n")
        fh.write(f"element vertex {len(mesh.vertices)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write(f"element face {len(mesh.triangles)}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.triangles.tolist():
            fh.write(f"3 {a} {b} {c}\n")
