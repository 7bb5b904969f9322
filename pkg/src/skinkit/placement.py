"""Poisson-disk placement of sensor mounts and the sensor manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InputError, PlacementError
from .frustum import FrustumModel
from .geometry.mesh import TriMesh
from .geometry.shell import region_faces

MANIFEST_VERSION = 1
FRUSTUM_CONVENTION = "x=+col,y=+row,z=boresight;half_extent=tan(fov_diag/2)/sqrt(2);range=radial"
DEFAULT_MAX_ATTEMPTS = 10_000
_CHUNK = 2048
# strictly above the disk radius so any distance evaluation order still passes ">= min_sep"
_SEP_MARGIN = 1.0 + 1e-12


@dataclass(frozen=True)
class PlacementConfig:
    min_separation: float
    seed: int = 0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        if not self.min_separation > 0:
            raise ValueError("min_separation must be > 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class SurfaceSample:
    position: np.ndarray
    normal: np.ndarray
    face_index: int
    barycentric: tuple = ()


@dataclass(frozen=True)
class MountPose:
    origin: np.ndarray
    rotation: np.ndarray


@dataclass(frozen=True)
class PcbFootprint:
    """Oriented bounding box of a sensor board; ``depth`` is along the mount normal."""

    width: float = 0.0254
    height: float = 0.0254
    depth: float = 0.003
    clearance: float = 0.0002

    def __post_init__(self):
        if min(self.width, self.height, self.depth) <= 0:
            raise ValueError("PCB extents must be > 0")
        if self.clearance < 0:
            raise ValueError("PCB clearance must be >= 0")

    @property
    def extents(self):
        return (self.width, self.height, self.depth)


def sample_poisson(mesh: TriMesh, region, cfg: PlacementConfig) -> list[SurfaceSample]:
    """Dart-throwing Poisson-disk samples over ``region`` faces (Euclidean metric).

    Candidates are drawn area-uniformly in a fixed order from ``cfg.seed``;
    sampling stops after ``cfg.max_attempts`` consecutive rejections.
    """
    faces = region_faces(mesh, region)
    if len(faces) == 0:
        raise PlacementError("empty region")
    areas = mesh.face_areas[faces]
    if areas.sum() <= 0:
        raise PlacementError("region has zero area")
    cum = np.cumsum(areas)
    cum /= cum[-1]
    tri = mesh.vertices[mesh.triangles[faces]]
    lo = tri.reshape(-1, 3).min(axis=0)
    hi = tri.reshape(-1, 3).max(axis=0)
    sep = float(cfg.min_separation)
    state = kernels.dart_state(lo, hi, sep, (sep * sep) * _SEP_MARGIN, cfg.max_attempts)
    rng = np.random.default_rng(cfg.seed)
    picked = []
    while not state.done:
        u = rng.random((_CHUNK, 3))
        fi = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), len(faces) - 1)
        s = np.sqrt(u[:, 1])
        bary = np.stack([1 - s, s * (1 - u[:, 2]), s * u[:, 2]], axis=1)
        pts = np.einsum("nk,nkj->nj", bary, tri[fi])
        for k in state.scan(pts):
            picked.append((pts[k], int(faces[fi[k]]), tuple(bary[k])))
    normals = mesh.face_normals
    return [SurfaceSample(p, normals[f].copy(), f, b) for p, f, b in picked]


def mount_frame(sample: SurfaceSample) -> MountPose:
    """Right-handed frame with z along the sample normal.

    The x axis is the global axis least aligned with the normal, projected
    onto the tangent plane; ties prefer X, then Y, then Z.
    """
    z = np.asarray(sample.normal, dtype=float)
    z = z / np.linalg.norm(z)
    k = int(np.argmin(np.abs(z)))  # argmin returns the first minimum: X before Y before Z
    a = np.zeros(3)
    a[k] = 1.0
    x = a - (a @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return MountPose(np.asarray(sample.position, dtype=float).copy(), np.column_stack([x, y, z]))


def lift_sample(sample: SurfaceSample, offset: float) -> SurfaceSample:
    return SurfaceSample(sample.position + offset * sample.normal, sample.normal,
                         sample.face_index, sample.barycentric)


# --- manifest -------------------------------------------------------------


@dataclass(frozen=True)
class SensorRecord:
    index: int
    origin: tuple
    rotation: tuple  # row-major 9
    fov_diag_deg: float
    grid: tuple
    pcb: tuple
    range_m: tuple = (0.0, 4.0)

    @property
    def pose(self) -> MountPose:
        return MountPose(np.array(self.origin), np.array(self.rotation).reshape(3, 3))

    @property
    def frustum(self) -> FrustumModel:
        return FrustumModel(self.fov_diag_deg, self.grid[0], self.grid[1], self.range_m[1], self.range_m[0])


@dataclass(frozen=True)
class SensorManifest:
    link_name: str
    sensors: tuple = ()
    skin_params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def by_index(self):
        return {s.index: s for s in self.sensors}

    def to_dict(self):
        return {
            "version": self.version,
            "frustum_convention": FRUSTUM_CONVENTION,
            "link_name": self.link_name,
            "skin_params": dict(self.skin_params),
            "provenance": dict(self.provenance),
            "sensors": [
                {
                    "index": s.index,
                    "origin_m": list(s.origin),
                    "rotation_rowmajor": list(s.rotation),
                    "fov_diag_deg": s.fov_diag_deg,
                    "grid": list(s.grid),
                    "range_m": list(s.range_m),
                    "pcb_m": list(s.pcb),
                }
                for s in self.sensors
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        try:
            if int(d["version"]) != MANIFEST_VERSION:
                raise InputError(f"unsupported manifest version {d['version']}")
            sensors = []
            for s in d["sensors"]:
                rot = np.array(s["rotation_rowmajor"], dtype=float).reshape(3, 3)
                if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6) or np.linalg.det(rot) < 0:
                    raise InputError(f"sensor {s['index']}: rotation is not a proper rotation")
                sensors.append(
                    SensorRecord(
                        index=int(s["index"]),
                        origin=tuple(float(x) for x in s["origin_m"]),
                        rotation=tuple(float(x) for x in s["rotation_rowmajor"]),
                        fov_diag_deg=float(s["fov_diag_deg"]),
                        grid=tuple(int(x) for x in s["grid"]),
                        pcb=tuple(float(x) for x in s["pcb_m"]),
                        range_m=tuple(float(x) for x in s.get("range_m", (0.0, 4.0))),
                    )
                )
            idx = [s.index for s in sensors]
            if len(set(idx)) != len(idx):
                raise InputError("duplicate sensor index in manifest")
            return cls(
                link_name=str(d["link_name"]),
                sensors=tuple(sensors),
                skin_params=dict(d.get("skin_params", {})),
                provenance=dict(d.get("provenance", {})),
                version=int(d["version"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed manifest: {exc!r}") from exc

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"manifest {path} is not JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise InputError("manifest must be a JSON object")
        return cls.from_dict(d)


def build_manifest(samples, pcb: PcbFootprint, frustum: FrustumModel, link_name: str,
                   skin_params=None, provenance=None) -> SensorManifest:
    """Number sensors 0..n-1 in sampling order, each with its mount frame."""
    if len(samples) > 256:
        raise PlacementError(f"{len(samples)} sensors exceed the 8-bit sensor index")
    records = []
    for i, s in enumerate(samples):
        pose = mount_frame(s)
        records.append(
            SensorRecord(
                index=i,
                origin=tuple(float(x) for x in pose.origin),
                rotation=tuple(float(x) for x in pose.rotation.ravel()),
                fov_diag_deg=float(frustum.fov_diag),
                grid=(frustum.rows, frustum.cols),
                pcb=tuple(float(x) for x in pcb.extents),
                range_m=(float(frustum.min_range), float(frustum.max_range)),
            )
        )
    return SensorManifest(link_name, tuple(records), dict(skin_params or {}), dict(provenance or {}))
