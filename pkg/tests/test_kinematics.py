import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skinkit.errors import InputError, KinematicsError
from skinkit.kinematics import (
    FR3_MDH,
    KinematicChain,
    Link,
    Pose,
    axis_angle,
    compose,
    forward_kinematics,
    fr3_chain,
    load_joint_state,
    orthonormalize,
    save_joint_state,
    transform_points,
)
from skinkit.placement import MountPose

angles = st.lists(st.floats(-math.pi, math.pi), min_size=7, max_size=7)


def _craig(q, rows):
    """Independent product of homogeneous modified-DH transforms."""
    T = np.eye(4)
    for (a, d, alpha), th in zip(rows, q):
        ca, sa, ct, s = math.cos(alpha), math.sin(alpha), math.cos(th), math.sin(th)
        T = T @ np.array([
            [ct, -s, 0, a],
            [s * ca, ct * ca, -sa, -sa * d],
            [s * sa, ct * sa, ca, ca * d],
            [0, 0, 0, 1],
        ])
    return T


def test_fr3_zero_pose():
    p = forward_kinematics(fr3_chain(), np.zeros(7), "link7")
    assert p.translation == pytest.approx([0.088, 0.0, 1.033], abs=1e-12)
    assert p.rotation[:, 2] == pytest.approx([0, 0, -1], abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(q=angles, k=st.integers(1, 7))
def test_fk_matches_homogeneous_oracle(q, k):
    p = forward_kinematics(fr3_chain(), q, f"link{k}")
    assert np.allclose(p.matrix(), _craig(q[:k], FR3_MDH[:k]), atol=1e-12)


def test_base_is_identity_and_names():
    chain = fr3_chain()
    assert chain.names == ["base"] + [f"link{i}" for i in range(1, 8)]
    assert chain.n_joints == 7
    assert np.array_equal(forward_kinematics(chain, np.zeros(7), "base").matrix(), np.eye(4))


def test_joint_only_moves_downstream_links():
    chain = fr3_chain()
    q = np.zeros(7)
    q2 = q.copy()
    q2[5] = 1.0
    for k in range(1, 6):
        a = forward_kinematics(chain, q, f"link{k}").matrix()
        b = forward_kinematics(chain, q2, f"link{k}").matrix()
        assert np.array_equal(a, b)


def test_pose_algebra():
    a = Pose(axis_angle([0, 0, 1], 0.3), [1, 2, 3])
    b = Pose(axis_angle([1, 0, 0], -0.7), [0.1, 0, 0])
    assert np.allclose((a @ b).matrix(), a.matrix() @ b.matrix())
    assert np.allclose((a @ a.inverse()).matrix(), np.eye(4), atol=1e-15)
    pts = np.random.default_rng(0).random((5, 3))
    h = np.c_[pts, np.ones(5)] @ a.matrix().T
    assert np.allclose(transform_points(a, pts), h[:, :3])
    m = MountPose(np.array([0.1, 0.2, 0.3]), b.rotation)
    mm = np.eye(4)
    mm[:3, :3], mm[:3, 3] = m.rotation, m.origin
    assert np.allclose(compose(a, m).matrix(), a.matrix() @ mm)


@settings(max_examples=50, deadline=None)
@given(axis=st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda a: np.linalg.norm(a) > 0.1),
       angle=st.floats(-10, 10))
def test_axis_angle_is_rotation(axis, angle):
    k = np.asarray(axis) / np.linalg.norm(axis)
    r = axis_angle(k, angle)
    assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)
    assert np.allclose(r @ k, k, atol=1e-12)


def test_orthonormalize():
    r = axis_angle([0, 1, 0], 0.4)
    noisy = r + 1e-8
    out = orthonormalize(noisy)
    assert np.allclose(out.T @ out, np.eye(3), atol=1e-15)
    assert np.allclose(out, r, atol=1e-7)
    for bad in [r * 1.01, -r, np.full((3, 3), np.nan)]:
        with pytest.raises(KinematicsError):
            orthonormalize(bad)


def test_chain_roundtrip(tmp_path):
    chain = fr3_chain()
    p = tmp_path / "c.json"
    chain.save(p)
    back = KinematicChain.load(p)
    q = [0.3, -0.2, 0.1, -1.5, 0.4, 1.2, -0.6]
    assert back.names == chain.names
    assert np.allclose(forward_kinematics(back, q, "link7").matrix(),
                       forward_kinematics(chain, q, "link7").matrix(), atol=1e-14)


def test_chain_and_joint_errors(tmp_path):
    chain = fr3_chain()
    with pytest.raises(KinematicsError):
        forward_kinematics(chain, np.zeros(6), "link3")
    with pytest.raises(KinematicsError):
        forward_kinematics(chain, np.zeros(7), "link9")
    with pytest.raises(KinematicsError):
        KinematicChain([Link("a", Pose.identity(), np.zeros(3)), Link("a", Pose.identity(), np.zeros(3))])
    with pytest.raises(KinematicsError):
        KinematicChain([Link("a", Pose.identity(), np.array([0, 0, 2.0]), "revolute")])
    with pytest.raises(KinematicsError):
        KinematicChain([Link("a", Pose.identity(), np.zeros(3), "prismatic")])
    p = tmp_path / "c.json"
    d = chain.to_dict()
    d["links"][2]["rotation_rowmajor"] = [1, 0, 0, 0, 1, 0, 0, 0, 2]
    p.write_text(json.dumps(d))
    with pytest.raises(KinematicsError):
        KinematicChain.load(p)
    p.write_text(json.dumps({"nolinks": []}))
    with pytest.raises(InputError):
        KinematicChain.load(p)


def test_joint_state_file(tmp_path):
    p = tmp_path / "q.json"
    save_joint_state([0.1, -0.2], p)
    assert load_joint_state(p).tolist() == [0.1, -0.2]
    p.write_text('{"angles_rad": [0.1, NaN]}')
    with pytest.raises(InputError):
        load_joint_state(p)
    p.write_text('{"angles": [0.1]}')
    with pytest.raises(InputError):
        load_joint_state(p)
