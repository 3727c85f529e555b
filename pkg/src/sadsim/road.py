"""Straight multi-lane highway geometry, kinematic bicycle integration,
and oriented-rectangle collision/offroad predicates.

Everything here is value-semantics and side-effect free; instances are
immutable and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import _core


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class RoadNetwork:
    """Straight carriageway with parallel lanes indexed 0 (rightmost)
    to lane_count - 1 (leftmost)."""

    lane_count: int
    lane_width: float
    length: float
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.lane_count < 2:
            raise ValueError(f"lane_count must be >= 2, got {self.lane_count}")
        if not self.lane_width > 0:
            raise ValueError(f"lane_width must be > 0, got {self.lane_width}")
        if not self.length > 0:
            raise ValueError(f"length must be > 0, got {self.length}")
        _require_finite(lane_width=self.lane_width, length=self.length,
                        origin_x=self.origin_x, origin_y=self.origin_y)

    @property
    def y_min(self) -> float:
        return self.origin_y

    @property
    def y_max(self) -> float:
        return self.origin_y + self.lane_count * self.lane_width

    @property
    def x_min(self) -> float:
        return self.origin_x

    @property
    def x_max(self) -> float:
        return self.origin_x + self.length

    def centerline_y(self, lane: int) -> float:
        if not 0 <= lane < self.lane_count:
            raise ValueError(f"lane {lane} outside 0..{self.lane_count - 1}")
        return self.origin_y + (lane + 0.5) * self.lane_width

    def is_valid_lane(self, lane: int) -> bool:
        return 0 <= lane < self.lane_count

    def lane_of(self, s_y: float) -> Optional[int]:
        return lane_of(s_y, self)

    def nearest_lane(self, s_y: float) -> int:
        """Closest valid lane index; clamps positions off the carriageway."""
        idx = math.floor((s_y - self.origin_y) / self.lane_width)
        return min(max(int(idx), 0), self.lane_count - 1)


@dataclass(frozen=True)
class VehicleParams:
    """Physical dimensions and actuator limits."""

    length: float = 4.5
    width: float = 1.8
    wheelbase: float = 2.9
    a_min: float = -9.0
    a_max: float = 3.0
    delta_max: float = 0.6
    vdelta_max: float = 0.4
    v_max: float = 50.0

    def __post_init__(self):
        if not self.length > self.wheelbase > 0:
            raise ValueError("require length > wheelbase > 0")
        if not self.width > 0:
            raise ValueError("width must be > 0")
        if not self.a_min < 0 < self.a_max:
            raise ValueError("require a_min < 0 < a_max")
        if not (self.delta_max > 0 and self.vdelta_max > 0 and self.v_max > 0):
            raise ValueError("delta_max, vdelta_max, v_max must be > 0")


@dataclass(frozen=True)
class VehicleState:
    """Ego kinematic state: longitudinal/lateral position, speed,
    steering angle, heading. Heading is wrapped to (-pi, pi]."""

    s_x: float
    s_y: float
    v: float
    delta: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        _require_finite(s_x=self.s_x, s_y=self.s_y, v=self.v,
                        delta=self.delta, psi=self.psi)
        if self.v < 0:
            raise ValueError(f"speed must be >= 0, got {self.v}")
        object.__setattr__(self, "psi", _core.wrap_angle(self.psi))

    def footprint(self, params: VehicleParams) -> "Footprint":
        return Footprint(self.s_x, self.s_y, self.psi,
                         params.length / 2.0, params.width / 2.0)


@dataclass(frozen=True)
class Footprint:
    """Oriented rectangle: center, heading, half extents."""

    center_x: float
    center_y: float
    heading: float
    half_length: float
    half_width: float

    def __post_init__(self):
        if not (self.half_length > 0 and self.half_width > 0):
            raise ValueError("half extents must be > 0")
        _require_finite(center_x=self.center_x, center_y=self.center_y,
                        heading=self.heading)

    def corners(self):
        return _core.rect_corners(self.center_x, self.center_y, self.heading,
                                  self.half_length, self.half_width)


def bicycle_step(state: VehicleState, accel: float, steer_rate: float,
                 dt: float, params: VehicleParams) -> VehicleState:
    """Advance the ego one explicit-Euler step.

    Commands are clamped to the actuator envelope before integration;
    non-finite inputs are rejected.
    """
    if not (math.isfinite(accel) and math.isfinite(steer_rate) and math.isfinite(dt)):
        raise ValueError("accel, steer_rate and dt must be finite")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    accel = min(max(accel, params.a_min), params.a_max)
    steer_rate = min(max(steer_rate, -params.vdelta_max), params.vdelta_max)
    sx, sy, v, delta, psi = _core.bicycle_step(
        state.s_x, state.s_y, state.v, state.delta, state.psi,
        accel, steer_rate, dt,
        params.wheelbase, params.v_max, params.delta_max)
    return VehicleState(sx, sy, v, delta, psi)


def rectangles_overlap(a: Footprint, b: Footprint) -> bool:
    """True iff the closed rectangles intersect (separating-axis test)."""
    return _core.rects_overlap(
        a.center_x, a.center_y, a.heading, a.half_length, a.half_width,
        b.center_x, b.center_y, b.heading, b.half_length, b.half_width)


def offroad(fp: Footprint, road: RoadNetwork) -> bool:
    """True iff any footprint corner leaves the carriageway rectangle."""
    return _core.rect_outside_box(
        fp.center_x, fp.center_y, fp.heading, fp.half_length, fp.half_width,
        road.x_min, road.x_max, road.y_min, road.y_max)


def lane_of(s_y: float, road: RoadNetwork) -> Optional[int]:
    """Lane index containing s_y, or None outside the carriageway.

    Interior lane boundaries belong to the higher-index lane; the outer
    top boundary counts as outside.
    """
    idx = math.floor((s_y - road.origin_y) / road.lane_width)
    if 0 <= idx < road.lane_count:
        return int(idx)
    return None


DEFAULT_ROAD = RoadNetwork(lane_count=3, lane_width=3.5, length=1000.0)
DEFAULT_PARAMS = VehicleParams()
