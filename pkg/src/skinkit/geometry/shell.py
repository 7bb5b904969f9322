"""Offset-shell generation: a solid layer extruded outward from a link surface."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import GeometryError, SelfIntersectionWarning
from .mesh import TriMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SkinParams:
    gap: float = 0.0
    thickness: float = 0.005
    region: tuple | None = None

    def __post_init__(self):
        if not self.gap >= 0:
            raise ValueError(f"gap must be >= 0, got {self.gap}")
        if not self.thickness > 0:
            raise ValueError(f"thickness must be > 0, got {self.thickness}")
        if self.region is not None:
            object.__setattr__(self, "region", tuple(int(f) for f in self.region))

    def to_dict(self):
        return {"gap_m": self.gap, "thickness_m": self.thickness}


def region_faces(mesh: TriMesh, region=None) -> np.ndarray:
    if region is None:
        return np.arange(len(mesh))
    faces = np.unique(np.asarray(region, dtype=np.int64))
    if len(faces) == 0:
        raise GeometryError("empty region")
    if faces[0] < 0 or faces[-1] >= len(mesh):
        raise GeometryError("region face index out of range")
    return faces


def offset_layers(mesh: TriMesh, params: SkinParams):
    """Region submesh plus its inner and outer offset vertex arrays."""
    faces = region_faces(mesh, params.region)
    sub = mesh.submesh(faces)
    if len(np.unique(sub.face_components())) != 1:
        raise GeometryError("region is not edge-connected")
    n = sub.vertex_normals  # from region faces only so boundary normals stay tangent to the cut
    inner = sub.vertices + params.gap * n
    outer = sub.vertices + (params.gap + params.thickness) * n
    return sub, inner, outer


def offset_shell(mesh: TriMesh, params: SkinParams) -> TriMesh:
    """Closed solid between offsets ``gap`` and ``gap + thickness`` along vertex normals.

    Open region boundaries are sealed by side walls. Self-intersections are
    reported through :class:`SelfIntersectionWarning`; the shell is still returned.
    """
    sub, inner, outer = offset_layers(mesh, params)
    nv = len(sub.vertices)
    t = sub.triangles
    outer_faces = t + nv
    inner_faces = t[:, ::-1]
    walls = []
    bnd = sub.boundary_edges()
    if len(bnd):
        a, b = bnd[:, 0], bnd[:, 1]
        # inner a, inner b, outer b / inner a, outer b, outer a: normal along edge x n
        walls = [np.stack([a, b, b + nv], 1), np.stack([a, b + nv, a + nv], 1)]
    tris = np.concatenate([outer_faces, inner_faces, *walls])
    shell = TriMesh(np.vstack([inner, outer]), tris)
    shell.meta.update(
        {
            "source_faces": region_faces(mesh, params.region),
            "n_outer": len(t),
            "boundary_edges": len(bnd),
        }
    )
    bad = find_self_intersections(shell, reference_normals=np.concatenate(
        [sub.face_normals, -sub.face_normals, np.zeros((len(tris) - 2 * len(t), 3))]))
    shell.meta["self_intersections"] = bad
    if len(bad):
        msg = f"offset shell self-intersects at {len(bad)} faces"
        log.warning(msg)
        warnings.warn(SelfIntersectionWarning(msg, bad), stacklevel=2)
    return shell


def outer_surface(mesh: TriMesh, params: SkinParams) -> TriMesh:
    """The outward-facing sheet of the shell (where sensors mount)."""
    sub, _, outer = offset_layers(mesh, params)
    out = TriMesh(outer, sub.triangles)
    out.meta["vertex_map"] = sub.meta["vertex_map"]
    return out


# --- self intersection ----------------------------------------------------


def _project(tri, axis):
    d = np.einsum("pkj,pj->pk", tri, axis)
    return d.min(axis=1), d.max(axis=1)


def _tri_tri_overlap(t1, t2, eps):
    """Vectorised separating-axis test for triangle pairs ``(P, 3, 3)``.

    Pairs that only touch within ``eps`` count as disjoint.
    """
    e1 = np.stack([t1[:, 1] - t1[:, 0], t1[:, 2] - t1[:, 1], t1[:, 0] - t1[:, 2]], 1)
    e2 = np.stack([t2[:, 1] - t2[:, 0], t2[:, 2] - t2[:, 1], t2[:, 0] - t2[:, 2]], 1)
    axes = [np.cross(e1[:, 0], e1[:, 1]), np.cross(e2[:, 0], e2[:, 1])]
    for i in range(3):
        for j in range(3):
            axes.append(np.cross(e1[:, i], e2[:, j]))
    overlap = np.ones(len(t1), dtype=bool)
    for ax in axes:
        n = np.linalg.norm(ax, axis=1, keepdims=True)
        valid = n[:, 0] > 1e-18
        ax = np.where(valid[:, None], ax / np.where(n > 0, n, 1), 0.0)
        lo1, hi1 = _project(t1, ax)
        lo2, hi2 = _project(t2, ax)
        sep = (hi1 < lo2 + eps) | (hi2 < lo1 + eps)
        overlap &= ~(sep & valid)
    return overlap


def find_self_intersections(mesh: TriMesh, reference_normals=None) -> np.ndarray:
    """Faces that intersect a non-adjacent face, or whose offset flipped orientation.

    ``reference_normals`` (optional, per face) are the expected normal directions;
    a face whose normal opposes its reference has folded over.
    """
    bad = set()
    if reference_normals is not None:
        ref = np.asarray(reference_normals)
        dots = np.einsum("ij,ij->i", mesh.face_normals, ref)
        has_ref = np.linalg.norm(ref, axis=1) > 0
        bad.update(np.flatnonzero(has_ref & (dots <= 0)).tolist())
    if len(mesh) < 2:
        return np.array(sorted(bad), dtype=np.int64)
    tri = mesh.vertices[mesh.triangles]
    cen = tri.mean(axis=1)
    rad = np.linalg.norm(tri - cen[:, None], axis=2).max(axis=1)
    pairs = cKDTree(cen).query_pairs(2 * rad.max(), output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        keep = np.linalg.norm(cen[i] - cen[j], axis=1) <= rad[i] + rad[j]
        ti, tj = mesh.triangles[i], mesh.triangles[j]
        shared = (ti[:, :, None] == tj[:, None, :]).any(axis=(1, 2))
        keep &= ~shared
        i, j = i[keep], j[keep]
        if len(i):
            eps = 1e-9 * max(float(np.ptp(mesh.vertices, axis=0).max()), 1e-12)
            hit = _tri_tri_overlap(tri[i], tri[j], eps)
            bad.update(i[hit].tolist())
            bad.update(j[hit].tolist())
    return np.array(sorted(bad), dtype=np.int64)
