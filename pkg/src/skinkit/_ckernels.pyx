# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, ceil, floor, INFINITY

cnp.import_array()


cdef inline double _dot(double ax, double ay, double az,
                        double bx, double by, double bz) nogil:
    return ax * bx + ay * by + az * bz


cdef double _pt_tri(double px, double py, double pz,
                    double ax, double ay, double az,
                    double bx, double by, double bz,
                    double cx, double cy, double cz) nogil:
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double d1 = _dot(abx, aby, abz, px - ax, py - ay, pz - az)
    cdef double d2 = _dot(acx, acy, acz, px - ax, py - ay, pz - az)
    cdef double d3 = _dot(abx, aby, abz, px - bx, py - by, pz - bz)
    cdef double d4 = _dot(acx, acy, acz, px - bx, py - by, pz - bz)
    cdef double d5 = _dot(abx, aby, abz, px - cx, py - cy, pz - cz)
    cdef double d6 = _dot(acx, acy, acz, px - cx, py - cy, pz - cz)
    cdef double vc = d1 * d4 - d3 * d2
    cdef double vb = d5 * d2 - d1 * d6
    cdef double va = d3 * d6 - d5 * d4
    cdef double qx, qy, qz, t, v, w, denom
    if d1 <= 0 and d2 <= 0:
        qx, qy, qz = ax, ay, az
    elif d3 >= 0 and d4 <= d3:
        qx, qy, qz = bx, by, bz
    elif vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        qx, qy, qz = ax + abx * t, ay + aby * t, az + abz * t
    elif d6 >= 0 and d5 <= d6:
        qx, qy, qz = cx, cy, cz
    elif vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        qx, qy, qz = ax + acx * t, ay + acy * t, az + acz * t
    elif va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx, qy, qz = bx + (cx - bx) * t, by + (cy - by) * t, bz + (cz - bz) * t
    else:
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        qx = ax + abx * v + acx * w
        qy = ay + aby * v + acy * w
        qz = az + abz * v + acz * w
    qx -= px
    qy -= py
    qz -= pz
    return sqrt(qx * qx + qy * qy + qz * qz)


def point_triangle_distance(p, a, b, c):
    cdef cnp.ndarray[double, ndim=2] P = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0]
    cdef cnp.ndarray[double, ndim=2] A = np.ascontiguousarray(np.broadcast_to(a, (n, 3)), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] B = np.ascontiguousarray(np.broadcast_to(b, (n, 3)), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] C = np.ascontiguousarray(np.broadcast_to(c, (n, 3)), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _pt_tri(P[i, 0], P[i, 1], P[i, 2],
                             A[i, 0], A[i, 1], A[i, 2],
                             B[i, 0], B[i, 1], B[i, 2],
                             C[i, 0], C[i, 1], C[i, 2])
    return out


cdef inline void _index_range(double lo, double hi, double origin, double h, Py_ssize_t n,
                              Py_ssize_t *i0, Py_ssize_t *i1) nogil:
    cdef Py_ssize_t a = <Py_ssize_t> ceil((lo - origin) / h - 0.5)
    cdef Py_ssize_t b = <Py_ssize_t> floor((hi - origin) / h - 0.5)
    i0[0] = a if a > 0 else 0
    i1[0] = b if b < n - 1 else n - 1


def band_distances(vertices, triangles, origin, double h, dims, double band):
    cdef cnp.ndarray[double, ndim=2] V = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] T = np.ascontiguousarray(triangles, dtype=np.int64)
    cdef Py_ssize_t nx = dims[0], ny = dims[1], nz = dims[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    dist_arr = np.full((nx, ny, nz), np.inf)
    tri_arr = np.full((nx, ny, nz), -1, dtype=np.int64)
    cdef double[:, :, ::1] dist = dist_arr
    cdef cnp.int64_t[:, :, ::1] tri = tri_arr
    cdef Py_ssize_t t, i, j, k, i0, i1, j0, j1, k0, k1
    cdef double ax, ay, az, bx, by, bz, cx, cy, cz, d, px, py, pz
    with nogil:
        for t in range(T.shape[0]):
            ax = V[T[t, 0], 0]; ay = V[T[t, 0], 1]; az = V[T[t, 0], 2]
            bx = V[T[t, 1], 0]; by = V[T[t, 1], 1]; bz = V[T[t, 1], 2]
            cx = V[T[t, 2], 0]; cy = V[T[t, 2], 1]; cz = V[T[t, 2], 2]
            _index_range(min(ax, bx, cx) - band, max(ax, bx, cx) + band, ox, h, nx, &i0, &i1)
            _index_range(min(ay, by, cy) - band, max(ay, by, cy) + band, oy, h, ny, &j0, &j1)
            _index_range(min(az, bz, cz) - band, max(az, bz, cz) + band, oz, h, nz, &k0, &k1)
            for i in range(i0, i1 + 1):
                px = ox + (i + 0.5) * h
                for j in range(j0, j1 + 1):
                    py = oy + (j + 0.5) * h
                    for k in range(k0, k1 + 1):
                        pz = oz + (k + 0.5) * h
                        d = _pt_tri(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz)
                        if d <= band and d < dist[i, j, k]:
                            dist[i, j, k] = d
                            tri[i, j, k] = t
    return dist_arr, tri_arr


cdef inline int _sgn(double x) nogil:
    return (x > 0) - (x < 0)


cdef inline int _edge_side(double ax, double ay, double bx, double by,
                           double px, double py) nogil:
    cdef int swap = (ax > bx) or (ax == bx and ay > by)
    cdef double tx, ty, dx, dy, e
    cdef int s
    if swap:
        tx = ax; ty = ay
        ax = bx; ay = by
        bx = tx; by = ty
    dx = bx - ax
    dy = by - ay
    e = dx * (py - ay) - dy * (px - ax)
    s = _sgn(e)
    if s == 0:
        s = -_sgn(dy) if dy != 0 else _sgn(dx)
    return -s if swap else s


def parity_inside(vertices, triangles, origin, double h, dims):
    cdef cnp.ndarray[double, ndim=2] V = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] T = np.ascontiguousarray(triangles, dtype=np.int64)
    cdef Py_ssize_t nx = dims[0], ny = dims[1], nz = dims[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    tog_arr = np.zeros((nx, ny, nz + 1), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] tog = tog_arr
    cdef Py_ssize_t t, i, j, i0, i1, j0, j1, k
    cdef double ax, ay, az, bx, by, bz, cx, cy, cz, area2, px, py, la, lb, z
    cdef int sa, sb, sc
    with nogil:
        for t in range(T.shape[0]):
            ax = V[T[t, 0], 0]; ay = V[T[t, 0], 1]; az = V[T[t, 0], 2]
            bx = V[T[t, 1], 0]; by = V[T[t, 1], 1]; bz = V[T[t, 1], 2]
            cx = V[T[t, 2], 0]; cy = V[T[t, 2], 1]; cz = V[T[t, 2], 2]
            area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area2 == 0.0:
                continue
            _index_range(min(ax, bx, cx), max(ax, bx, cx), ox, h, nx, &i0, &i1)
            _index_range(min(ay, by, cy), max(ay, by, cy), oy, h, ny, &j0, &j1)
            sa = _edge_side(ax, ay, bx, by, cx, cy)
            sb = _edge_side(bx, by, cx, cy, ax, ay)
            sc = _edge_side(cx, cy, ax, ay, bx, by)
            for i in range(i0, i1 + 1):
                px = ox + (i + 0.5) * h
                for j in range(j0, j1 + 1):
                    py = oy + (j + 0.5) * h
                    if _edge_side(ax, ay, bx, by, px, py) != sa:
                        continue
                    if _edge_side(bx, by, cx, cy, px, py) != sb:
                        continue
                    if _edge_side(cx, cy, ax, ay, px, py) != sc:
                        continue
                    la = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area2
                    lb = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area2
                    z = la * az + lb * bz + (1.0 - la - lb) * cz
                    k = <Py_ssize_t> ceil((z - oz) / h - 0.5)
                    if k < 0:
                        k = 0
                    elif k > nz:
                        k = nz
                    tog[i, j, k] ^= 1
    return (np.bitwise_xor.accumulate(tog_arr[:, :, :nz], axis=2) & 1).astype(bool)


cdef class DartState:
    """Dart-throwing state with a uniform hash grid over accepted points."""

    cdef public double min_sep2
    cdef public int max_attempts
    cdef public long consecutive
    cdef public bint done
    cdef double lo[3]
    cdef double cell
    cdef Py_ssize_t dims[3]
    cdef cnp.int64_t[::1] head
    cdef list _pts
    cdef list _next

    def __init__(self, lo, hi, double min_sep, double min_sep2, int max_attempts):
        cdef int k
        cdef double ext
        cdef double total
        self.min_sep2 = min_sep2
        self.max_attempts = max_attempts
        self.consecutive = 0
        self.done = False
        # cells slightly larger than min_sep so non-neighbour cells never conflict
        self.cell = min_sep * (1.0 + 1e-9)
        while True:
            total = 1.0
            for k in range(3):
                ext = hi[k] - lo[k]
                self.dims[k] = <Py_ssize_t> floor(ext / self.cell) + 1
                total *= self.dims[k]
            if total <= (1 << 22):
                break
            self.cell *= 2.0
        for k in range(3):
            self.lo[k] = lo[k]
        self.head = np.full(self.dims[0] * self.dims[1] * self.dims[2], -1, dtype=np.int64)
        self._pts = []
        self._next = []

    @property
    def points(self):
        if not self._pts:
            return np.empty((0, 3))
        return np.array(self._pts, dtype=np.float64)

    cdef Py_ssize_t _coord(self, double x, int k):
        cdef Py_ssize_t c = <Py_ssize_t> floor((x - self.lo[k]) / self.cell)
        if c < 0:
            return 0
        if c >= self.dims[k]:
            return self.dims[k] - 1
        return c

    def scan(self, cands):
        cdef cnp.ndarray[double, ndim=2] C = np.ascontiguousarray(cands, dtype=np.float64)
        cdef Py_ssize_t n = C.shape[0], idx, ci, cj, ck, di, dj, dk, ii, jj, kk, cellid, p
        cdef double x, y, z, dx, dy, dz
        cdef bint ok
        cdef list accepted = []
        cdef double[:, ::1] pts_view
        cdef cnp.ndarray[double, ndim=2] pts_arr = np.zeros((max(len(self._pts), 1) + n, 3))
        cdef cnp.ndarray[cnp.int64_t, ndim=1] nxt = np.full(len(self._pts) + n, -1, dtype=np.int64)
        cdef Py_ssize_t npts = len(self._pts)
        for p in range(npts):
            pts_arr[p, 0] = self._pts[p][0]
            pts_arr[p, 1] = self._pts[p][1]
            pts_arr[p, 2] = self._pts[p][2]
            nxt[p] = self._next[p]
        for idx in range(n):
            if self.done:
                break
            x = C[idx, 0]; y = C[idx, 1]; z = C[idx, 2]
            ci = self._coord(x, 0); cj = self._coord(y, 1); ck = self._coord(z, 2)
            ok = True
            for di in range(-1, 2):
                ii = ci + di
                if ii < 0 or ii >= self.dims[0] or not ok:
                    continue
                for dj in range(-1, 2):
                    jj = cj + dj
                    if jj < 0 or jj >= self.dims[1] or not ok:
                        continue
                    for dk in range(-1, 2):
                        kk = ck + dk
                        if kk < 0 or kk >= self.dims[2]:
                            continue
                        p = self.head[(ii * self.dims[1] + jj) * self.dims[2] + kk]
                        while p >= 0:
                            dx = x - pts_arr[p, 0]
                            dy = y - pts_arr[p, 1]
                            dz = z - pts_arr[p, 2]
                            if not (dx * dx + dy * dy + dz * dz >= self.min_sep2):
                                ok = False
                                break
                            p = nxt[p]
                        if not ok:
                            break
            if ok:
                self.consecutive = 0
                accepted.append(idx)
                cellid = (ci * self.dims[1] + cj) * self.dims[2] + ck
                pts_arr[npts, 0] = x
                pts_arr[npts, 1] = y
                pts_arr[npts, 2] = z
                nxt[npts] = self.head[cellid]
                self.head[cellid] = npts
                self._pts.append((x, y, z))
                self._next.append(nxt[npts])
                npts += 1
            else:
                self.consecutive += 1
                if self.consecutive >= self.max_attempts:
                    self.done = True
        return np.asarray(accepted, dtype=np.int64)
