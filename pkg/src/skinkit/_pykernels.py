"""Pure numpy implementations of the hot kernels.

These define the reference semantics; the compiled module in ``_ckernels``
must agree with them bit-for-bit.
"""

import numpy as np

__all__ = [
    "point_triangle_distance",
    "band_distances",
    "parity_inside",
    "DartState",
]


def _dot(u, v):
    # fixed left-to-right order, same as the compiled kernel (einsum may reorder)
    return u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1] + u[:, 2] * v[:, 2]


def point_triangle_distance(p, a, b, c):
    """Euclidean distance from each ``p[i]`` to triangle ``(a[i], b[i], c[i])``.

    All inputs are ``(N, 3)``; ``a, b, c`` may also be ``(3,)`` and broadcast.
    Region classification follows Ericson's closest-point construction.
    """
    p = np.asarray(p, dtype=np.float64)
    a, b, c = (np.broadcast_to(np.asarray(x, dtype=np.float64), p.shape) for x in (a, b, c))
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    # unselected branches may divide by zero on degenerate triangles
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v_in = vb * denom
        w_in = vc * denom

        in_a = (d1 <= 0) & (d2 <= 0)
        in_b = (d3 >= 0) & (d4 <= d3)
        in_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        in_c = (d6 >= 0) & (d5 <= d6)
        in_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        in_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)

        q = a + ab * v_in[:, None] + ac * w_in[:, None]
        # later assignments must not override earlier regions: apply in reverse priority
        q = np.where(in_bc[:, None], b + (c - b) * t_bc[:, None], q)
        q = np.where(in_ac[:, None], a + ac * t_ac[:, None], q)
        q = np.where(in_c[:, None], c, q)
        q = np.where(in_ab[:, None], a + ab * t_ab[:, None], q)
        q = np.where(in_b[:, None], b, q)
        q = np.where(in_a[:, None], a, q)
        r = q - p
    return np.sqrt(_dot(r, r))


def _index_range(lo, hi, origin, h, n):
    # voxel centres sit at origin + (k + 0.5) h
    i0 = int(np.ceil((lo - origin) / h - 0.5))
    i1 = int(np.floor((hi - origin) / h - 0.5))
    return max(i0, 0), min(i1, n - 1)


def band_distances(vertices, triangles, origin, h, dims, band):
    """Exact unsigned distance for voxels within ``band`` of some triangle.

    Returns ``(dist, tri)``: ``dist`` is ``inf`` and ``tri`` is ``-1`` outside
    the band.
    """
    nx, ny, nz = (int(d) for d in dims)
    dist = np.full((nx, ny, nz), np.inf)
    tri = np.full((nx, ny, nz), -1, dtype=np.int64)
    origin = np.asarray(origin, dtype=np.float64)
    for t, (ia, ib, ic) in enumerate(triangles):
        a, b, c = vertices[ia], vertices[ib], vertices[ic]
        lo = np.minimum(np.minimum(a, b), c) - band
        hi = np.maximum(np.maximum(a, b), c) + band
        rng = [_index_range(lo[k], hi[k], origin[k], h, (nx, ny, nz)[k]) for k in range(3)]
        if any(r[0] > r[1] for r in rng):
            continue
        xs = origin[0] + (np.arange(rng[0][0], rng[0][1] + 1) + 0.5) * h
        ys = origin[1] + (np.arange(rng[1][0], rng[1][1] + 1) + 0.5) * h
        zs = origin[2] + (np.arange(rng[2][0], rng[2][1] + 1) + 0.5) * h
        X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        d = point_triangle_distance(pts, a, b, c).reshape(X.shape)
        sl = (
            slice(rng[0][0], rng[0][1] + 1),
            slice(rng[1][0], rng[1][1] + 1),
            slice(rng[2][0], rng[2][1] + 1),
        )
        cur = dist[sl]
        better = (d <= band) & (d < cur)
        cur[better] = d[better]
        tri[sl][better] = t
    return dist, tri


def _edge_side(ax, ay, bx, by, px, py):
    """Sign of the canonical edge function with a consistent symbolic perturbation.

    The edge is evaluated with endpoints in lexicographic order so a shared
    edge yields identical bits from both incident triangles; zeros are broken
    as if the query point were nudged by (eps, eps**2).
    """
    swap = (ax > bx) or (ax == bx and ay > by)
    if swap:
        ax, ay, bx, by = bx, by, ax, ay
    dx = bx - ax
    dy = by - ay
    e = dx * (py - ay) - dy * (px - ax)
    s = np.sign(e)
    tie = -np.sign(dy) if dy != 0 else np.sign(dx)
    s = np.where(s == 0, tie, s)
    return -s if swap else s


def parity_inside(vertices, triangles, origin, h, dims):
    """Inside mask by crossing parity along +z columns through voxel centres."""
    nx, ny, nz = (int(d) for d in dims)
    toggles = np.zeros((nx, ny, nz + 1), dtype=np.uint8)
    ox, oy, oz = (float(v) for v in origin)
    for ia, ib, ic in triangles:
        a, b, c = vertices[ia], vertices[ib], vertices[ic]
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if area2 == 0.0:
            continue
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        i0, i1 = _index_range(lo[0], hi[0], ox, h, nx)
        j0, j1 = _index_range(lo[1], hi[1], oy, h, ny)
        if i0 > i1 or j0 > j1:
            continue
        xs = ox + (np.arange(i0, i1 + 1) + 0.5) * h
        ys = oy + (np.arange(j0, j1 + 1) + 0.5) * h
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        # interior lies on the same side of every edge as the opposite vertex
        inside = np.ones(X.shape, dtype=bool)
        for (p, q, r) in ((a, b, c), (b, c, a), (c, a, b)):
            s_pt = _edge_side(p[0], p[1], q[0], q[1], X, Y)
            s_r = _edge_side(p[0], p[1], q[0], q[1], r[0], r[1])
            inside &= s_pt == s_r
        if not inside.any():
            continue
        ii, jj = np.nonzero(inside)
        px = X[ii, jj]
        py = Y[ii, jj]
        la = ((b[0] - px) * (c[1] - py) - (b[1] - py) * (c[0] - px)) / area2
        lb = ((c[0] - px) * (a[1] - py) - (c[1] - py) * (a[0] - px)) / area2
        lc = 1.0 - la - lb
        z = la * a[2] + lb * b[2] + lc * c[2]
        k = np.ceil((z - oz) / h - 0.5).astype(np.int64)
        np.clip(k, 0, nz, out=k)
        np.bitwise_xor.at(toggles, (ii + i0, jj + j0, k), 1)
    return (np.bitwise_xor.accumulate(toggles[:, :, :nz], axis=2) & 1).astype(bool)


class DartState:
    """Sequential dart-throwing state for Poisson-disk rejection.

    Candidates are consumed strictly in order; a candidate is accepted when
    its squared distance to every accepted point is at least ``min_sep2``.
    Scanning halts after ``max_attempts`` consecutive rejections.
    """

    def __init__(self, lo, hi, min_sep, min_sep2, max_attempts):
        self.min_sep2 = float(min_sep2)
        self.max_attempts = int(max_attempts)
        self.points = np.empty((0, 3))
        self.consecutive = 0
        self.done = False

    def scan(self, cands):
        cands = np.ascontiguousarray(cands, dtype=np.float64)
        accepted = []
        start = 0
        n = len(cands)
        while start < n and not self.done:
            rest = cands[start:]
            if len(self.points):
                ok = np.ones(len(rest), dtype=bool)
                for p in self.points:
                    dx = rest[:, 0] - p[0]
                    dy = rest[:, 1] - p[1]
                    dz = rest[:, 2] - p[2]
                    ok &= dx * dx + dy * dy + dz * dz >= self.min_sep2
                hits = np.flatnonzero(ok)
            else:
                hits = np.array([0])
            budget = self.max_attempts - self.consecutive
            if len(hits) == 0 or hits[0] >= budget:
                used = min(len(rest), budget)
                self.consecutive += used
                if self.consecutive >= self.max_attempts:
                    self.done = True
                break
            k = int(hits[0])
            self.consecutive = 0
            accepted.append(start + k)
            self.points = np.vstack([self.points, rest[k]])
            start += k + 1
        return np.asarray(accepted, dtype=np.int64)
