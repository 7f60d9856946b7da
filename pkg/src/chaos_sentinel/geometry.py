"""Deployment and directional sensing geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ANGLE_EPS = 1e-9


@dataclass(frozen=True)
class SensorPose:
    x: float
    y: float
    orientation: float  # degrees in [0, 360), counter-clockwise from +x

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


def deploy_poses(count: int, width: float, height: float, rng: np.random.Generator) -> list[SensorPose]:
    xs = rng.uniform(0.0, width, count)
    ys = rng.uniform(0.0, height, count)
    th = rng.uniform(0.0, 360.0, count)
    return [SensorPose(float(x), float(y), float(t)) for x, y, t in zip(xs, ys, th)]


def bearing_offset(pose: SensorPose, point: tuple[float, float]) -> float:
    """Signed angle in degrees from the sensor axis to ``point``, in [-180, 180)."""
    bearing = math.degrees(math.atan2(point[1] - pose.y, point[0] - pose.x))
    return (bearing - pose.orientation + 180.0) % 360.0 - 180.0


def in_sector(pose: SensorPose, point: tuple[float, float], aov: float, sensing_range: float) -> bool:
    """Closed circular sector test: distance <= range and |offset| <= aov / 2."""
    dx = point[0] - pose.x
    dy = point[1] - pose.y
    d2 = dx * dx + dy * dy
    if d2 > sensing_range * sensing_range:
        return False
    if d2 == 0.0 or aov >= 360.0:
        return True
    return abs(bearing_offset(pose, point)) <= aov / 2.0 + ANGLE_EPS
