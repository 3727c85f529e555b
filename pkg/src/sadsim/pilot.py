"""Low-level maneuver execution: turns a discrete (lateral, longitudinal)
option pair into per-timestep acceleration and steering-rate commands.

Lane changes follow a quintic lateral reference over a fixed duration and
are committed: once started, a maneuver runs to completion regardless of
later lateral requests. All functions are stateless over explicit plan
values and thread-safe.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from . import _core
from .road import RoadNetwork, VehicleParams, VehicleState


class Lateral(enum.IntEnum):
    LEFT = 0
    CENTER = 1
    RIGHT = 2


class Longitudinal(enum.IntEnum):
    ACCELERATE = 0
    MAINTAIN = 1
    BRAKE = 2
    HARD_BRAKE = 3


@dataclass(frozen=True)
class HighLevelAction:
    lateral: Lateral
    longitudinal: Longitudinal

    @property
    def indices(self) -> tuple[int, int]:
        return int(self.lateral), int(self.longitudinal)

    @staticmethod
    def from_indices(lat: int, lon: int) -> "HighLevelAction":
        return HighLevelAction(Lateral(lat), Longitudinal(lon))


MAINTAIN_ACTION = HighLevelAction(Lateral.CENTER, Longitudinal.MAINTAIN)

N_LAT_OPTIONS = len(Lateral)
N_LON_OPTIONS = len(Longitudinal)

ALL_ACTIONS = tuple(HighLevelAction(lat, lon)
                    for lat in Lateral for lon in Longitudinal)


class PlanKind(enum.Enum):
    KEEP_LANE = "keep_lane"
    LANE_CHANGE_LEFT = "lane_change_left"
    LANE_CHANGE_RIGHT = "lane_change_right"


@dataclass(frozen=True)
class ManeuverPlan:
    kind: PlanKind
    start_time: float
    end_time: float
    target_lane: int
    y_start: float
    y_target: float

    def ref(self, t: float) -> tuple[float, float, float]:
        """Lateral reference (y, dy/dt, d2y/dt2) at absolute time t."""
        if self.kind is PlanKind.KEEP_LANE:
            return self.y_target, 0.0, 0.0
        return _core.lane_change_ref(self.y_start, self.y_target,
                                     self.start_time, self.end_time, t)

    def active(self, t: float) -> bool:
        """A lane change still in flight at time t (keep-lane never is)."""
        return self.kind is not PlanKind.KEEP_LANE and t < self.end_time - 1e-9


@dataclass(frozen=True)
class PilotConfig:
    """Lane-change duration, steering-law gains, and the per-option
    longitudinal accelerations."""

    t_lc: float = 4.0
    k_y: float = 27.0
    k_psi: float = 27.0
    k_d: float = 9.0
    accel_table: dict = field(default_factory=lambda: {
        Longitudinal.ACCELERATE: 2.0,
        Longitudinal.MAINTAIN: 0.0,
        Longitudinal.BRAKE: -3.0,
        Longitudinal.HARD_BRAKE: -8.0,
    })


DEFAULT_PILOT = PilotConfig()


def plan(action: HighLevelAction, ego: VehicleState, road: RoadNetwork,
         t_now: float, active_plan: Optional[ManeuverPlan] = None,
         config: PilotConfig = DEFAULT_PILOT) -> ManeuverPlan:
    """Select the maneuver for this decision tick.

    An in-flight lane change is returned unchanged (commitment). A left or
    right request with no valid adjacent lane degrades to keep-lane; plan()
    never fails.
    """
    if active_plan is not None and active_plan.active(t_now):
        return active_plan

    lane = road.nearest_lane(ego.s_y)
    if action.lateral is Lateral.CENTER:
        target = lane
    elif action.lateral is Lateral.LEFT:
        target = lane + 1
    else:
        target = lane - 1

    if target == lane or not road.is_valid_lane(target):
        return ManeuverPlan(PlanKind.KEEP_LANE, t_now, t_now, lane,
                            ego.s_y, road.centerline_y(lane))

    kind = (PlanKind.LANE_CHANGE_LEFT if target > lane
            else PlanKind.LANE_CHANGE_RIGHT)
    return ManeuverPlan(kind, t_now, t_now + config.t_lc, target,
                        ego.s_y, road.centerline_y(target))


def control(plan_: ManeuverPlan, longitudinal: Longitudinal,
            ego: VehicleState, t_now: float, params: VehicleParams,
            config: PilotConfig = DEFAULT_PILOT) -> tuple[float, float]:
    """Per-timestep (acceleration, steering rate) tracking the plan.

    Longitudinal command is a table lookup clamped to the actuator range.
    The steering rate tracks the lateral reference with speed-normalized
    gains plus curvature feedforward, clamped to +/- vdelta_max.
    """
    accel = config.accel_table[longitudinal]
    accel = min(max(accel, params.a_min), params.a_max)

    y_ref, dy_ref, ddy_ref = plan_.ref(t_now)
    vv = max(ego.v, 1.0)
    psi_ref = math.atan2(dy_ref, vv)
    delta_ref = math.atan(params.wheelbase * ddy_ref / (vv * vv))
    steer_rate = _core.steer_rate_cmd(
        y_ref - ego.s_y, psi_ref - ego.psi, delta_ref - ego.delta, ego.v,
        config.k_y, config.k_psi, config.k_d,
        params.wheelbase, params.vdelta_max)
    return accel, steer_rate
