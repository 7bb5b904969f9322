"""Analytic mesh fixtures with outward-facing winding."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def triangle(side=1.0) -> TriMesh:
    return TriMesh([[0, 0, 0], [side, 0, 0], [0, side, 0]], [[0, 1, 2]])


def box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned box, 12 triangles."""
    h = np.asarray(extents, dtype=float) / 2
    c = np.asarray(center, dtype=float)
    signs = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    v = c + signs * h
    # vertex id = 4*ix + 2*iy + iz
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    t = []
    for a, b, c_, d in quads:
        t += [(a, b, c_), (a, c_, d)]
    return TriMesh(v, t)


def rectangle(width=0.28, height=0.104, nx=28, ny=10, z=0.0) -> TriMesh:
    """Open planar patch in the xy plane centred on the origin, normal +z."""
    xs = np.linspace(-width / 2, width / 2, nx + 1)
    ys = np.linspace(-height / 2, height / 2, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    v = np.stack([X.ravel(), Y.ravel(), np.full(X.size, z)], axis=1)
    idx = np.arange(X.size).reshape(nx + 1, ny + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    t = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriMesh(v, t)


def _tube(radius, length, segments, rings, arc):
    full = np.isclose(arc, 2 * np.pi)
    ncol = segments if full else segments + 1
    th = np.linspace(0.0, arc, segments + 1)[:ncol]
    zs = np.linspace(-length / 2, length / 2, rings + 1)
    TH, Z = np.meshgrid(th, zs, indexing="ij")
    v = np.stack([radius * np.cos(TH).ravel(), radius * np.sin(TH).ravel(), Z.ravel()], axis=1)
    idx = np.arange(v.shape[0]).reshape(ncol, rings + 1)
    nxt = np.roll(idx, -1, axis=0) if full else idx[1:]
    cur = idx if full else idx[:-1]
    a = cur[:, :-1].ravel()
    b = nxt[:, :-1].ravel()
    c = nxt[:, 1:].ravel()
    d = cur[:, 1:].ravel()
    t = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return v, t, idx


def cylinder(radius=0.05, length=0.28, segments=96, rings=28, caps=True) -> TriMesh:
    """Cylinder along z, centred on the origin.

    With ``caps`` the mesh is closed and ``meta['lateral']`` lists the side faces.
    """
    v, t, idx = _tube(radius, length, segments, rings, 2 * np.pi)
    lateral = np.arange(len(t))
    if caps:
        bottom, top = len(v), len(v) + 1
        v = np.vstack([v, [0, 0, -length / 2], [0, 0, length / 2]])
        ring0 = idx[:, 0]
        ring1 = idx[:, -1]
        cap_b = np.stack([np.full(segments, bottom), np.roll(ring0, -1), ring0], 1)
        cap_t = np.stack([np.full(segments, top), ring1, np.roll(ring1, -1)], 1)
        t = np.concatenate([t, cap_b, cap_t])
    m = TriMesh(v, t)
    m.meta["lateral"] = lateral
    return m


def half_cylinder(radius=0.104 / np.pi, length=0.28, segments=24, rings=28) -> TriMesh:
    """Open half-tube (theta in [0, pi]) along z with outward normals."""
    v, t, _ = _tube(radius, length, segments, rings, np.pi)
    return TriMesh(v, t)


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)) -> TriMesh:
    p = (1 + 5 ** 0.5) / 2
    v = np.array(
        [[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
         [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]],
        dtype=float,
    )
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    verts = list(map(tuple, v))
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j])
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(nf)
    return TriMesh(np.asarray(center) + radius * np.array(verts), f)
