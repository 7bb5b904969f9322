import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skinkit.errors import GeometryError, SelfIntersectionWarning
from skinkit.geometry import fixtures
from skinkit.geometry.mesh import TriMesh
from skinkit.geometry.shell import (
    SkinParams,
    find_self_intersections,
    offset_shell,
    outer_surface,
    region_faces,
)


def _quiet_shell(mesh, params):
    with warnings.catch_warnings():
        warnings.simplefilter("error", SelfIntersectionWarning)
        return offset_shell(mesh, params)


def test_slab_volume_is_exact():
    rect = fixtures.rectangle(0.1, 0.1, 10, 10)
    shell = _quiet_shell(rect, SkinParams(thickness=0.005))
    assert shell.is_watertight and shell.is_oriented
    assert shell.volume == pytest.approx(0.1 * 0.1 * 0.005, rel=1e-9)
    assert shell.meta["n_outer"] == len(rect)
    assert shell.meta["boundary_edges"] == 40


def test_slab_gap_shifts_without_changing_volume():
    rect = fixtures.rectangle(0.1, 0.1, 4, 4)
    shell = _quiet_shell(rect, SkinParams(gap=0.002, thickness=0.003))
    z = shell.vertices[:, 2]
    assert z.min() == pytest.approx(0.002) and z.max() == pytest.approx(0.005)
    assert shell.volume == pytest.approx(0.1 * 0.1 * 0.003, rel=1e-9)


def test_tube_matches_polygon_and_analytic_volume():
    n, r, length, g, t = 96, 0.05, 0.28, 0.002, 0.005
    cyl = fixtures.cylinder(r, length, n, 28)
    shell = _quiet_shell(cyl, SkinParams(gap=g, thickness=t, region=tuple(cyl.meta["lateral"])))
    assert shell.is_watertight
    poly = 0.5 * n * math.sin(2 * math.pi / n) * ((r + g + t) ** 2 - (r + g) ** 2) * length
    # diagonal quad splits tilt area-weighted normals slightly off radial
    assert shell.volume == pytest.approx(poly, rel=1e-4)
    analytic = math.pi * ((r + g + t) ** 2 - (r + g) ** 2) * length
    assert abs(shell.volume / analytic - 1) < 0.03


def test_spherical_shell_volume():
    r, t = 0.1, 0.005
    shell = _quiet_shell(fixtures.icosphere(r, 4), SkinParams(thickness=t))
    analytic = 4 / 3 * math.pi * ((r + t) ** 3 - r ** 3)
    assert shell.is_watertight
    assert abs(shell.volume / analytic - 1) < 0.03
    # a closed region has no side walls
    assert shell.meta["boundary_edges"] == 0


def test_outer_surface_is_offset_sheet():
    sphere = fixtures.icosphere(0.1, 3)
    outer = outer_surface(sphere, SkinParams(gap=0.001, thickness=0.004))
    d = np.linalg.norm(outer.vertices, axis=1)
    assert np.allclose(d, 0.105, atol=1e-9)
    assert np.all(np.einsum("ij,ij->i", outer.face_normals, outer.centroids) > 0)


def test_concave_fold_is_flagged():
    # offsetting toward the axis of a half-cylinder by more than its radius folds the shell
    concave = fixtures.half_cylinder().flipped()
    with pytest.warns(SelfIntersectionWarning) as rec:
        shell = offset_shell(concave, SkinParams(thickness=0.05))
    assert len(shell.meta["self_intersections"]) > 0
    assert len(rec[0].message.faces) == len(shell.meta["self_intersections"])


def test_dent_folds_only_when_thick():
    rect = fixtures.rectangle(0.1, 0.1, 20, 20)
    v = rect.vertices.copy()
    v[:, 2] = 0.01 * np.exp(-(v[:, 0] ** 2 + v[:, 1] ** 2) / 2e-4)
    dent = TriMesh(v, rect.triangles).flipped()
    assert len(_quiet_shell(dent, SkinParams(thickness=0.001)).meta["self_intersections"]) == 0
    with pytest.warns(SelfIntersectionWarning):
        thick = offset_shell(dent, SkinParams(thickness=0.05))
    assert len(thick.meta["self_intersections"]) > 0


def test_clean_shells_report_nothing():
    for mesh, p in [
        (fixtures.icosphere(0.1, 3), SkinParams(thickness=0.005)),
        (fixtures.half_cylinder(), SkinParams(thickness=0.005)),
    ]:
        shell = _quiet_shell(mesh, p)
        assert len(find_self_intersections(shell)) == 0


def test_region_validation():
    rect = fixtures.rectangle(0.1, 0.1, 4, 4)
    with pytest.raises(GeometryError):
        region_faces(rect, [])
    with pytest.raises(GeometryError):
        region_faces(rect, [0, 999])
    # two faces that touch only at a corner are not edge-connected
    with pytest.raises(GeometryError):
        offset_shell(rect, SkinParams(region=(0, 10)))
    with pytest.raises(ValueError):
        SkinParams(thickness=0)
    with pytest.raises(ValueError):
        SkinParams(gap=-1e-3)


@settings(max_examples=20, deadline=None)
@given(
    gap=st.floats(0, 0.01),
    thickness=st.floats(1e-4, 0.02),
    w=st.floats(0.02, 0.3),
    h=st.floats(0.02, 0.3),
)
def test_flat_patch_shell_is_prism(gap, thickness, w, h):
    rect = fixtures.rectangle(w, h, 3, 2)
    shell = _quiet_shell(rect, SkinParams(gap=gap, thickness=thickness))
    assert shell.is_watertight
    assert shell.volume == pytest.approx(w * h * thickness, rel=1e-7)
