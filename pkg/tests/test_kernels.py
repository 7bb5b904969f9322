import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from skinkit import _pykernels, kernels

compiled = pytest.mark.skipif("compiled" not in kernels.available(), reason="extension not built")
coords = arrays(np.float64, (3,), elements=st.floats(-1, 1, allow_nan=False))


def test_backend_switching():
    prev = kernels.use_backend("python")
    try:
        assert kernels.backend_name() == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(prev)
    assert kernels.backend_name() == prev


def test_distance_regions(backend):
    a, b, c = np.array([0.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0.0, 1, 0])
    p = np.array([
        [0.2, 0.2, 0.5],    # face
        [-1.0, -1.0, 0.0],  # vertex a
        [0.5, -2.0, 0.0],   # edge ab
        [1.0, 1.0, 0.0],    # edge bc
        [3.0, 0.0, 4.0],    # vertex b
    ])
    d = kernels.point_triangle_distance(p, a, b, c)
    assert d == pytest.approx([0.5, np.sqrt(2), 2.0, np.sqrt(0.5), np.sqrt(4 + 16)])


@settings(max_examples=200, deadline=None)
@given(p=coords, a=coords, b=coords, c=coords)
def test_distance_matches_dense_sampling(p, a, b, c):
    if np.linalg.norm(np.cross(b - a, c - a)) < 1e-3:
        return
    d = _pykernels.point_triangle_distance(p[None], a, b, c)[0]
    # independent bound: no point of a fine barycentric sampling lies closer
    s = np.linspace(0, 1, 41)
    u, v = np.meshgrid(s, s)
    keep = u + v <= 1
    q = a + u[keep, None] * (b - a) + v[keep, None] * (c - a)
    brute = np.linalg.norm(q - p, axis=1).min()
    assert d <= brute + 1e-12
    span = max(np.linalg.norm(b - a), np.linalg.norm(c - a))
    assert brute - d <= span / 40 + 1e-12


@compiled
@settings(max_examples=100, deadline=None)
@given(p=arrays(np.float64, (16, 3), elements=st.floats(-2, 2, allow_nan=False)),
       a=coords, b=coords, c=coords)
def test_distance_backends_bitwise(p, a, b, c):
    from skinkit import _ckernels

    d_py = _pykernels.point_triangle_distance(p, a, b, c)
    d_c = _ckernels.point_triangle_distance(p, a, b, c)
    assert np.array_equal(d_py, d_c, equal_nan=True)


@compiled
def test_parity_backends_bitwise_on_tied_grid():
    from skinkit import _ckernels
    from skinkit.geometry import fixtures

    # vertices on voxel-centre lines force the edge tie rule everywhere
    m = fixtures.icosphere(1.0, 2)
    v = np.round(m.vertices * 4) / 4
    origin, h, dims = np.array([-1.125] * 3), 0.25, (9, 9, 9)
    a = _pykernels.parity_inside(v, m.triangles, origin, h, dims)
    b = _ckernels.parity_inside(v, m.triangles, origin, h, dims)
    assert np.array_equal(a, b)


def test_parity_box_exact(backend):
    from skinkit.geometry import fixtures

    m = fixtures.box((1.0, 1.0, 1.0))
    inside = kernels.parity_inside(m.vertices, m.triangles, np.array([-1.0] * 3), 0.25, (8, 8, 8))
    assert inside.sum() == 4 ** 3
    assert inside[2:6, 2:6, 2:6].all()


@compiled
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), sep=st.floats(0.05, 0.4), attempts=st.integers(1, 300))
def test_dart_backends_bitwise(seed, sep, attempts):
    from skinkit import _ckernels

    cands = np.random.default_rng(seed).random((700, 3))
    out = []
    for mod in (_pykernels, _ckernels):
        st_ = mod.DartState(np.zeros(3), np.ones(3), sep, sep * sep, attempts)
        idx = [st_.scan(cands[i:i + 100]) for i in range(0, 700, 100)]
        out.append((np.concatenate(idx), st_.points.copy(), st_.consecutive, st_.done))
    assert np.array_equal(out[0][0], out[1][0])
    assert np.array_equal(out[0][1], out[1][1])
    assert out[0][2:] == out[1][2:]


def test_dart_stops_after_consecutive_rejections(backend):
    st_ = kernels.dart_state(np.zeros(3), np.ones(3), 10.0, 100.0, 5)
    first = st_.scan(np.zeros((3, 3)))
    assert first.tolist() == [0] and not st_.done
    st_.scan(np.zeros((3, 3)))
    assert st_.done and st_.consecutive == 5
    assert st_.scan(np.ones((2, 3)) * 100).tolist() == []
