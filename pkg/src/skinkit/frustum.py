"""Multizone time-of-flight imager as a grid of zone-centre rays.

Sensor frame: z is the boresight, x grows with column, y grows with row.
The image plane is square, so the per-axis half extent on the unit-focal
plane is ``tan(fov_diag / 2) / sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SENTINEL = 0xFFFF


@dataclass(frozen=True)
class ZoneRay:
    row: int
    col: int
    direction: np.ndarray


@dataclass(frozen=True)
class FrustumModel:
    fov_diag: float = 65.0  # degrees
    rows: int = 8
    cols: int = 8
    max_range: float = 4.0  # meters
    min_range: float = 0.0

    def __post_init__(self):
        if not 0 < self.fov_diag < 180:
            raise ValueError(f"fov_diag must be in (0, 180), got {self.fov_diag}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if not (self.max_range > self.min_range >= 0):
            raise ValueError("need max_range > min_range >= 0")

    @property
    def half_extent(self) -> float:
        return math.tan(math.radians(self.fov_diag) / 2) / math.sqrt(2)

    @cached_property
    def directions(self) -> np.ndarray:
        """``(rows, cols, 3)`` unit zone directions; read-only."""
        w = self.half_extent
        # integer numerators keep mirrored zones exact negatives of each other
        u = w * (2 * np.arange(self.cols) + 1 - self.cols) / self.cols
        v = w * (2 * np.arange(self.rows) + 1 - self.rows) / self.rows
        V, U = np.meshgrid(v, u, indexing="ij")
        d = np.stack([U, V, np.ones_like(U)], axis=-1)
        d /= np.sqrt(U * U + V * V + 1.0)[..., None]
        d.setflags(write=False)
        return d

    def zone_direction(self, row: int, col: int) -> ZoneRay:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"zone ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return ZoneRay(row, col, self.directions[row, col].copy())

    def off_axis_deg(self) -> np.ndarray:
        return np.degrees(np.arccos(np.clip(self.directions[..., 2], -1.0, 1.0)))

    def in_range(self, range_mm) -> np.ndarray:
        r = np.asarray(range_mm)
        m = r / 1000.0
        return (r != SENTINEL) & (m >= self.min_range) & (m <= self.max_range)


def project_zone(ray: ZoneRay, range_mm: int):
    """Sensor-frame point for a radial range reading, or ``None`` for the sentinel."""
    if range_mm == SENTINEL:
        return None
    return (range_mm / 1000.0) * ray.direction


def project_frame(model: FrustumModel, ranges_mm):
    """Vectorised projection of a row-major range grid.

    Returns ``(points, mask)`` where ``points`` holds only valid zones in
    row-major order and ``mask`` is the ``(rows, cols)`` validity grid.
    """
    r = np.asarray(ranges_mm, dtype=np.int64).reshape(model.rows, model.cols)
    mask = model.in_range(r)
    pts = (r[mask] / 1000.0)[:, None] * model.directions[mask]
    return pts, mask
