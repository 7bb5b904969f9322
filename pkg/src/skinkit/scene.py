"""Analytic scenes that stand in for the physical world.

Ray casting against spheres, oriented boxes and planes produces the range
frames a real imager would report, and analytic distance-to-surface gives
ground truth for scoring reconstructions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .frustum import SENTINEL, FrustumModel
from .kinematics import Pose, compose, forward_kinematics, orthonormalize
from .telemetry import ToFFrame

T_MIN = 1e-12
MAX_RANGE_MM = 65534


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValueError("sphere radius must be > 0")

    def intersect(self, o, d):
        oc = o - self.center
        b = np.einsum("ij,ij->i", d, oc)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius * self.radius
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            s = np.sqrt(disc)
        t0 = -b - s
        t1 = -b + s
        t = np.where(t0 > T_MIN, t0, np.where(t1 > T_MIN, t1, np.inf))
        return np.where(disc >= 0, t, np.inf)

    def distance(self, p):
        return np.abs(np.linalg.norm(p - self.center, axis=-1) - self.radius)

    def to_dict(self):
        return {"type": "sphere", "center_m": self.center.tolist(), "radius_m": float(self.radius)}

    def transformed(self, pose: Pose):
        return Sphere(pose.rotation @ self.center + pose.translation, self.radius)


@dataclass(frozen=True, eq=False)
class Box:
    rotation: np.ndarray
    translation: np.ndarray
    extents: np.ndarray  # full side lengths

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        object.__setattr__(self, "extents", np.asarray(self.extents, dtype=float).reshape(3))
        if np.any(self.extents <= 0):
            raise ValueError("box extents must be > 0")

    def intersect(self, o, d):
        lo = (o - self.translation) @ self.rotation
        ld = d @ self.rotation
        h = self.extents / 2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t1 = (-h - lo) / ld
            t2 = (h - lo) / ld
        tnear = np.fmax.reduce(np.fmin(t1, t2), axis=1)
        tfar = np.fmin.reduce(np.fmax(t1, t2), axis=1)
        hit = (tfar >= tnear) & (tfar > T_MIN)
        t = np.where(tnear > T_MIN, tnear, tfar)
        return np.where(hit, t, np.inf)

    def distance(self, p):
        q = np.abs((p - self.translation) @ self.rotation) - self.extents / 2
        out = np.linalg.norm(np.maximum(q, 0), axis=-1)
        return np.abs(out + np.minimum(q.max(axis=-1), 0))

    def to_dict(self):
        return {
            "type": "box",
            "rotation_rowmajor": self.rotation.ravel().tolist(),
            "translation_m": self.translation.tolist(),
            "extents_m": self.extents.tolist(),
        }

    def transformed(self, pose: Pose):
        return Box(pose.rotation @ self.rotation, pose.rotation @ self.translation + pose.translation,
                   self.extents)


@dataclass(frozen=True, eq=False)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", n)

    def intersect(self, o, d):
        den = d @ self.normal
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = ((self.point - o) @ self.normal) / den
        return np.where((den != 0) & (t > T_MIN), t, np.inf)

    def distance(self, p):
        return np.abs((p - self.point) @ self.normal)

    def to_dict(self):
        return {"type": "plane", "point_m": self.point.tolist(), "normal": self.normal.tolist()}

    def transformed(self, pose: Pose):
        return Plane(pose.rotation @ self.point + pose.translation, pose.rotation @ self.normal)


@dataclass(frozen=True)
class Scene:
    primitives: tuple = ()

    def ray_cast_many(self, origins, dirs) -> np.ndarray:
        """Nearest positive hit distance per ray, ``inf`` where nothing is hit."""
        d = np.atleast_2d(np.asarray(dirs, dtype=float))
        o = np.broadcast_to(np.asarray(origins, dtype=float), d.shape)
        t = np.full(len(d), np.inf)
        for prim in self.primitives:
            t = np.minimum(t, prim.intersect(o, d))
        return t

    def ray_cast(self, origin, direction):
        d = np.asarray(direction, dtype=float)
        if abs(np.linalg.norm(d) - 1) > 1e-9:
            raise ValueError("ray direction must be unit length")
        t = float(self.ray_cast_many(np.asarray(origin, dtype=float)[None], d[None])[0])
        return None if np.isinf(t) else t

    def distance(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.full(len(p), np.inf)
        for prim in self.primitives:
            d = np.minimum(d, prim.distance(p))
        return d

    def transformed(self, pose: Pose) -> "Scene":
        return Scene(tuple(p.transformed(pose) for p in self.primitives))

    def to_dict(self):
        return {"primitives": [p.to_dict() for p in self.primitives]}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        prims = []
        try:
            for e in d["primitives"]:
                kind = e["type"]
                if kind == "sphere":
                    prims.append(Sphere(e["center_m"], float(e["radius_m"])))
                elif kind == "box":
                    rot = orthonormalize(np.array(e.get("rotation_rowmajor", np.eye(3).ravel()), dtype=float))
                    prims.append(Box(rot, e["translation_m"], e["extents_m"]))
                elif kind == "plane":
                    prims.append(Plane(e["point_m"], e["normal"]))
                else:
                    raise InputError(f"unknown primitive type {kind!r}")
        except InputError:
            raise
        except Exception as exc:
            raise InputError(f"malformed scene: {exc!r}") from exc
        return cls(tuple(prims))

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read scene {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"scene {path} is not JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise InputError("scene file must hold a JSON object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class NoiseModel:
    sigma_mm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_mm >= 0:
            raise ValueError("sigma_mm must be >= 0")

    def rng(self, sensor_index: int):
        # independent stream per sensor so sensors can be simulated in any order
        return np.random.default_rng([int(self.seed), int(sensor_index)])


def _quantize(t, model: FrustumModel, noise_mm):
    valid = np.isfinite(t) & (t >= model.min_range) & (t <= model.max_range)
    with np.errstate(invalid="ignore"):
        mm = np.rint(1000.0 * np.where(valid, t, 0.0) + noise_mm)
    mm = np.clip(mm, 0, MAX_RANGE_MM).astype(np.int64)
    return np.where(valid, mm, SENTINEL)


def _zone_dirs(model: FrustumModel, supersample: int):
    if supersample <= 1:
        return model.directions.reshape(-1, 1, 3)
    w = model.half_extent
    k = supersample
    sub = (2 * np.arange(k) + 1 - k) / k  # sub-cell centres in [-1, 1] of a zone
    u = w * (2 * np.arange(model.cols) + 1 - model.cols) / model.cols
    v = w * (2 * np.arange(model.rows) + 1 - model.rows) / model.rows
    du, dv = w / model.cols, w / model.rows
    U = u[None, :, None, None] + du * sub[None, None, None, :]
    V = v[:, None, None, None] + dv * sub[None, None, :, None]
    U, V = np.broadcast_arrays(U, V)
    d = np.stack([U, V, np.ones_like(U)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return d.reshape(model.rows * model.cols, k * k, 3)


def sense_frame(scene: Scene, pose: Pose, model: FrustumModel, noise: NoiseModel, rng=None,
                supersample: int = 1) -> np.ndarray:
    """Row-major ``rows*cols`` range readings (mm, sentinel for no return)."""
    dirs = _zone_dirs(model, supersample)
    n, k, _ = dirs.shape
    world = dirs.reshape(-1, 3) @ pose.rotation.T
    t = scene.ray_cast_many(pose.translation, world).reshape(n, k).min(axis=1)
    if rng is None:
        rng = noise.rng(0)
    eps = rng.standard_normal(n) * noise.sigma_mm
    return _quantize(t, model, eps)


def sense_zone(scene: Scene, sensor_world_pose: Pose, model: FrustumModel, row: int, col: int,
               noise: NoiseModel, rng=None) -> int:
    ray = model.zone_direction(row, col)
    t = scene.ray_cast_many(sensor_world_pose.translation,
                            (sensor_world_pose.rotation @ ray.direction)[None])
    if rng is None:
        rng = noise.rng(0)
    return int(_quantize(t, model, rng.standard_normal(1) * noise.sigma_mm)[0])


def sensor_world_poses(manifest, chain, q) -> dict:
    """World pose of every manifest sensor: link pose composed with the mount pose."""
    link = forward_kinematics(chain, q, manifest.link_name)
    return {s.index: compose(link, s.pose) for s in manifest.sensors}


def simulate_capture(scene: Scene, manifest, chain, q, frames_per_sensor: int = 1,
                     rate_hz: float = 15.0, noise: NoiseModel | None = None,
                     start_us: int = 0, supersample: int = 1):
    """Yield frames tick by tick: every sensor's frame ``k`` before any frame ``k + 1``."""
    if frames_per_sensor < 0:
        raise ValueError("frames_per_sensor must be >= 0")
    if not rate_hz > 0:
        raise ValueError("rate_hz must be > 0")
    noise = NoiseModel(0.0, 0) if noise is None else noise
    poses = sensor_world_poses(manifest, chain, q)
    sensors = sorted(manifest.sensors, key=lambda s: s.index)
    rngs = {s.index: noise.rng(s.index) for s in sensors}
    models = {s.index: s.frustum for s in sensors}
    for seq in range(frames_per_sensor):
        ts = int(start_us + round(seq * 1e6 / rate_hz))
        for s in sensors:
            r = sense_frame(scene, poses[s.index], models[s.index], noise, rngs[s.index], supersample)
            yield ToFFrame(s.index, seq, ts, tuple(int(x) for x in r))
