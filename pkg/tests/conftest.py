import math

import numpy as np
import pytest

from skinkit import kernels
from skinkit.frustum import FrustumModel
from skinkit.geometry import fixtures
from skinkit.kinematics import fr3_chain, forward_kinematics
from skinkit.placement import PcbFootprint, PlacementConfig, build_manifest, sample_poisson
from skinkit.scene import Plane, Scene, Sphere

FR3_Q = np.array([0.1, -0.4, 0.2, -1.9, 0.3, 1.6, 0.7])


@pytest.fixture(params=kernels.available())
def backend(request):
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


@pytest.fixture(scope="session")
def patch_manifest():
    """Eight sensors Poisson-placed on the 0.28 m x 0.104 m skin footprint, link5 frame."""
    patch = fixtures.rectangle(0.28, 0.104, 28, 10)
    samples = sample_poisson(patch, None, PlacementConfig(0.045, seed=1))
    assert len(samples) >= 8
    return build_manifest(samples[:8], PcbFootprint(), FrustumModel(), "link5")


@pytest.fixture(scope="session")
def chain():
    return fr3_chain()


def link_pose(chain):
    return forward_kinematics(chain, FR3_Q, "link5")


def sphere_scene(chain):
    """Sphere r=0.1 m 0.5 m in front of the patch, with a background plane 0.9 m out."""
    lp = link_pose(chain)
    local = Scene((Sphere([0.0, 0.0, 0.5], 0.1), Plane([0.0, 0.0, 0.9], [0.0, 0.0, -1.0])))
    return local.transformed(lp)


def plane_scene(chain, distance=0.35):
    lp = link_pose(chain)
    return Scene((Plane([0.0, 0.0, distance], [0.0, 0.0, -1.0]),)).transformed(lp)


def zone_angle(model, row, col):
    return math.acos(model.directions[row, col, 2])


# --- acceptance reporting ------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    num = getattr(item.function, "criterion", None)
    if num is None or rep.when != "call" and rep.passed:
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    if rep.failed:
        msg = str(rep.longrepr).strip().splitlines()[-1] if rep.longrepr else ""
        detail = f"{detail}; {msg}" if detail else msg
        _CRITERIA[num] = ("FAIL", detail)
    elif rep.when == "call":
        _CRITERIA[num] = ("PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {detail}")
