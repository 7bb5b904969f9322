"""World-frame point clouds from range frames, PLY export and accuracy scoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .frustum import SENTINEL, project_frame
from .scene import sensor_world_poses
from .kinematics import transform_points

log = logging.getLogger(__name__)

# one colour per multiplexer channel
PALETTE = np.array(
    [
        [230, 25, 75],
        [60, 180, 75],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
    ],
    dtype=np.uint8,
)


def sensor_color(index: int):
    return tuple(int(c) for c in PALETTE[int(index) % len(PALETTE)])


@dataclass
class PointCloud:
    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    sensor_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    row: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    col: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    range_mm: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    timestamp_us: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.positions)

    @property
    def colors(self):
        return PALETTE[self.sensor_index % len(PALETTE)] if len(self) else np.empty((0, 3), np.uint8)


def assemble(frames, manifest, chain, q) -> PointCloud:
    """Project every valid zone through its sensor's manifest pose.

    Points are ordered by (sensor index, sequence, zone). Sentinel and
    out-of-range readings are skipped; frames from unknown sensors are dropped.
    Both are counted in ``stats``.
    """
    poses = sensor_world_poses(manifest, chain, q)
    records = manifest.by_index()
    stats = {"frames": 0, "frames_dropped_unknown_sensor": 0, "zones": 0,
             "zones_sentinel": 0, "zones_out_of_range": 0, "points": 0}
    parts = []
    for fr in sorted(frames, key=lambda f: (f.sensor_index, f.sequence)):
        rec = records.get(fr.sensor_index)
        if rec is None:
            stats["frames_dropped_unknown_sensor"] += 1
            continue
        stats["frames"] += 1
        model = rec.frustum
        ranges = np.asarray(fr.ranges_mm, dtype=np.int64)
        local, mask = project_frame(model, ranges)
        n_sent = int((ranges == SENTINEL).sum())
        stats["zones"] += ranges.size
        stats["zones_sentinel"] += n_sent
        stats["zones_out_of_range"] += ranges.size - n_sent - int(mask.sum())
        rr, cc = np.nonzero(mask)
        parts.append((
            transform_points(poses[fr.sensor_index], local),
            np.full(len(rr), fr.sensor_index),
            rr, cc,
            ranges.reshape(mask.shape)[mask],
            np.full(len(rr), fr.timestamp_us, dtype=np.int64),
        ))
    if not parts:
        return PointCloud(stats=stats)
    cols = [np.concatenate(c) for c in zip(*parts)]
    cloud = PointCloud(cols[0].reshape(-1, 3), *[c.astype(np.int64) for c in cols[1:]], stats=stats)
    stats["points"] = len(cloud)
    return cloud


# --- PLY ------------------------------------------------------------------------

_PLY_PROPS = [("x", "float"), ("y", "float"), ("z", "float"),
              ("red", "uchar"), ("green", "uchar"), ("blue", "uchar"),
              ("sensor", "uchar"), ("row", "uchar"), ("col", "uchar")]


def write_ply(cloud: PointCloud, path, comments=(), binary: bool = False) -> None:
    """Coloured point cloud; colours are a pure function of the sensor index."""
    pos = np.asarray(cloud.positions, dtype=np.float32).reshape(-1, 3)
    rgb = cloud.colors
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0"]
    header += [f"comment {c}" for c in comments]
    header.append(f"element vertex {len(pos)}")
    header += [f"property {t} {n}" for n, t in _PLY_PROPS]
    header.append("end_header")
    try:
        with open(path, "wb") as fh:
            fh.write(("\n".join(header) + "\n").encode("ascii"))
            if binary:
                dt = np.dtype([("p", "<f4", 3), ("c", "u1", 3), ("s", "u1"), ("r", "u1"), ("k", "u1")])
                arr = np.zeros(len(pos), dtype=dt)
                arr["p"], arr["c"] = pos, rgb
                arr["s"], arr["r"], arr["k"] = cloud.sensor_index, cloud.row, cloud.col
                fh.write(arr.tobytes())
            else:
                lines = [
                    f"{x:.9g} {y:.9g} {z:.9g} {r} {g} {b} {s} {rw} {cl}\n"
                    for (x, y, z), (r, g, b), s, rw, cl in zip(
                        pos.tolist(), rgb.tolist(), cloud.sensor_index.tolist(),
                        cloud.row.tolist(), cloud.col.tolist())
                ]
                fh.write("".join(lines).encode("ascii"))
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def read_ply(path) -> PointCloud:
    """Read PLY files written by :func:`write_ply` (ASCII or binary)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise InputError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    fmt, n, props, comments = None, None, [], []
    for line in header:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element" and parts[1] == "vertex":
            try:
                n = int(parts[2])
            except (IndexError, ValueError):
                raise InputError(f"{path}: bad vertex count") from None
        elif parts[0] == "property" and len(parts) == 3:
            props.append(parts[2])
        elif parts[0] == "comment":
            comments.append(line[8:])
    if n is None or n < 0 or fmt not in ("ascii", "binary_little_endian"):
        raise InputError(f"{path}: unsupported PLY header")
    if props[:3] != ["x", "y", "z"]:
        raise InputError(f"{path}: PLY vertices lack x y z")
    try:
        if fmt == "ascii":
            rows = body.decode("ascii").split("\n")[:n]
            arr = np.array([r.split() for r in rows], dtype=np.float64).reshape(n, -1) if n else np.empty((0, len(props)))
            if arr.shape[1] != len(props):
                raise ValueError("column count mismatch")
        else:
            types = dict(_PLY_PROPS)
            dt = np.dtype([(p, "<f4" if types.get(p, "float") == "float" else "u1") for p in props])
            rec = np.frombuffer(body, dtype=dt, count=n)
            arr = np.stack([rec[p].astype(np.float64) for p in props], axis=1) if n else np.empty((0, len(props)))
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: malformed PLY body: {exc}") from exc
    col = {p: arr[:, i] for i, p in enumerate(props)}
    pos = np.stack([col["x"], col["y"], col["z"]], axis=1).astype(np.float32).astype(np.float64)
    z = np.zeros(n, dtype=np.int64)
    cloud = PointCloud(
        pos,
        col.get("sensor", z).astype(np.int64),
        col.get("row", z).astype(np.int64),
        col.get("col", z).astype(np.int64),
        np.zeros(n, dtype=np.int64),
        np.zeros(n, dtype=np.int64),
        stats={"comments": comments},
    )
    return cloud


# --- evaluation -------------------------------------------------------------------


@dataclass
class EvalReport:
    point_count: int
    rmse_m: float
    max_error_m: float
    valid_fraction: float
    per_sensor: dict

    def to_dict(self):
        return {
            "global": {
                "point_count": self.point_count,
                "rmse_m": self.rmse_m,
                "max_error_m": self.max_error_m,
                "valid_fraction": self.valid_fraction,
            },
            "per_sensor": {str(k): v for k, v in sorted(self.per_sensor.items())},
        }


def _summary(err, zones):
    n = len(err)
    return {
        "point_count": n,
        "rmse_m": float(np.sqrt(np.mean(err ** 2))) if n else 0.0,
        "max_error_m": float(err.max()) if n else 0.0,
        "valid_fraction": float(n / zones) if zones else 0.0,
    }


def evaluate(cloud: PointCloud, scene, zones_per_sensor: dict | None = None) -> EvalReport:
    """Analytic distance from each point to the nearest scene surface.

    ``zones_per_sensor`` (zone counts) sets the valid-fraction denominator;
    without it the fraction is taken against 64 zones per contributing frame.
    """
    if not scene.primitives:
        raise InputError("evaluate needs a non-empty scene")
    err = scene.distance(cloud.positions) if len(cloud) else np.empty(0)
    sensors = sorted(set(cloud.sensor_index.tolist()) | set((zones_per_sensor or {}).keys()))
    per = {}
    total_zones = 0
    for s in sensors:
        m = cloud.sensor_index == s
        if zones_per_sensor is not None:
            zones = zones_per_sensor.get(s, 0)
        else:
            zones = 64 * len(set(cloud.timestamp_us[m].tolist()))
        total_zones += zones
        per[s] = _summary(err[m], zones)
    if zones_per_sensor is None and not sensors:
        total_zones = cloud.stats.get("zones", 0)
    g = _summary(err, total_zones)
    return EvalReport(g["point_count"], g["rmse_m"], g["max_error_m"], g["valid_fraction"], per)


def zone_counts(frames) -> dict:
    out = {}
    for fr in frames:
        out[fr.sensor_index] = out.get(fr.sensor_index, 0) + len(fr.ranges_mm)
    return out
