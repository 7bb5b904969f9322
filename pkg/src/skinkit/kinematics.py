"""Rigid poses and serial kinematic chains."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, KinematicsError

ORTHO_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def __matmul__(self, other) -> "Pose":
        return compose(self, other)

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def compose(world_link, mount) -> Pose:
    """``world_link`` after ``mount``; accepts any object with rotation/(origin|translation)."""
    t_m = getattr(mount, "translation", None)
    if t_m is None:
        t_m = mount.origin
    r = world_link.rotation @ mount.rotation
    return Pose(r, world_link.rotation @ np.asarray(t_m, dtype=float) + world_link.translation)


def transform_points(pose: Pose, pts) -> np.ndarray:
    p = np.asarray(pts, dtype=float)
    return p @ pose.rotation.T + pose.translation


def axis_angle(axis, angle) -> np.ndarray:
    """Rodrigues rotation about a unit ``axis``."""
    k = np.asarray(axis, dtype=float)
    kx, ky, kz = k
    K = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def orthonormalize(r, tol=ORTHO_TOL) -> np.ndarray:
    """Polar projection onto SO(3); rejects matrices further than ``tol`` from it."""
    r = np.asarray(r, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(r)) or np.abs(r.T @ r - np.eye(3)).max() > tol or np.linalg.det(r) <= 0:
        raise KinematicsError("rotation is not orthonormal within tolerance")
    u, _, vt = np.linalg.svd(r)
    return u @ vt


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    fixed_pose: Pose
    axis: np.ndarray
    joint_type: str = "fixed"


class KinematicChain:
    """Serial chain; each link's pose is ``parent ∘ fixed_pose ∘ Rot(axis, q)``."""

    def __init__(self, links):
        self.links = tuple(links)
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            raise KinematicsError("link names must be unique")
        for l in self.links:
            if l.joint_type not in ("revolute", "fixed"):
                raise KinematicsError(f"link {l.name}: unknown joint type {l.joint_type!r}")
            if l.joint_type == "revolute" and abs(np.linalg.norm(l.axis) - 1) > 1e-9:
                raise KinematicsError(f"link {l.name}: joint axis must be unit length")
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def n_joints(self):
        return sum(l.joint_type == "revolute" for l in self.links)

    @property
    def names(self):
        return [l.name for l in self.links]

    def to_dict(self):
        return {
            "links": [
                {
                    "name": l.name,
                    "rotation_rowmajor": [float(x) for x in l.fixed_pose.rotation.ravel()],
                    "translation_m": [float(x) for x in l.fixed_pose.translation],
                    "axis": [float(x) for x in l.axis],
                    "type": l.joint_type,
                }
                for l in self.links
            ]
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        try:
            links = []
            for e in d["links"]:
                rot = orthonormalize(np.array(e.get("rotation_rowmajor", np.eye(3).ravel()), dtype=float))
                links.append(
                    Link(
                        name=str(e["name"]),
                        fixed_pose=Pose(rot, np.array(e.get("translation_m", [0, 0, 0]), dtype=float)),
                        axis=np.array(e.get("axis", [0, 0, 1]), dtype=float).reshape(3),
                        joint_type=str(e.get("type", "fixed")),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed chain: {exc!r}") from exc
        return cls(links)

    @classmethod
    def load(cls, path):
        return cls.from_dict(_read_json(path, "chain"))


def load_joint_state(path) -> np.ndarray:
    d = _read_json(path, "joint state")
    try:
        q = np.array(d["angles_rad"], dtype=float).reshape(-1)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed joint state: {exc!r}") from exc
    if not np.all(np.isfinite(q)):
        raise InputError("joint angles must be finite")
    return q


def save_joint_state(q, path):
    Path(path).write_text(json.dumps({"angles_rad": [float(x) for x in q]}) + "\n", encoding="utf-8")


def _read_json(path, what):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise InputError(f"{what} file must hold a JSON object")
    return d


def forward_kinematics(chain: KinematicChain, q, link_name: str) -> Pose:
    q = np.asarray(q, dtype=float).reshape(-1)
    if len(q) != chain.n_joints:
        raise KinematicsError(f"joint state has {len(q)} angles, chain has {chain.n_joints} joints")
    if link_name not in chain._index:
        raise KinematicsError(f"unknown link {link_name!r}")
    pose = Pose.identity()
    j = 0
    for link in chain.links[: chain._index[link_name] + 1]:
        pose = pose @ link.fixed_pose
        if link.joint_type == "revolute":
            pose = Pose(pose.rotation @ axis_angle(link.axis, q[j]), pose.translation)
            j += 1
    return pose


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def chain_from_mdh(rows, base_name="base", prefix="link") -> KinematicChain:
    """Build a revolute chain from modified DH rows ``(a, d, alpha)``.

    Each row becomes ``RotX(alpha) TransX(a) TransZ(d)`` followed by a z-axis joint.
    """
    links = [Link(base_name, Pose.identity(), np.array([0.0, 0.0, 1.0]), "fixed")]
    for i, (a, d, alpha) in enumerate(rows, 1):
        r = _rot_x(alpha)
        t = np.array([a, 0.0, 0.0]) + r @ np.array([0.0, 0.0, d])
        links.append(Link(f"{prefix}{i}", Pose(r, t), np.array([0.0, 0.0, 1.0]), "revolute"))
    return KinematicChain(links)


# Franka FR3 arm, modified DH (a, d, alpha) from the manufacturer's documentation
FR3_MDH = [
    (0.0, 0.333, 0.0),
    (0.0, 0.0, -math.pi / 2),
    (0.0, 0.316, math.pi / 2),
    (0.0825, 0.0, math.pi / 2),
    (-0.0825, 0.384, -math.pi / 2),
    (0.0, 0.0, math.pi / 2),
    (0.088, 0.0, math.pi / 2),
]


def fr3_chain() -> KinematicChain:
    return chain_from_mdh(FR3_MDH)
