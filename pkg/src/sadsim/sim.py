"""Shared execution core: single sub-step advance and the world-state
predicates (collision / offroad / goal).

Both the environment's step loop and the shield's predictive rollouts call
these helpers so that a rollout is an exact replay of what execution would
do from the same state.
"""

from __future__ import annotations

from typing import Optional

from . import _core, pilot
from .road import VehicleParams, VehicleState
from .scenario import Scenario


def substep(state: VehicleState, plan_: pilot.ManeuverPlan,
            longitudinal: pilot.Longitudinal, t_now: float, dt: float,
            params: VehicleParams, pcfg: pilot.PilotConfig) -> VehicleState:
    """Advance the ego one sim step under the pilot's commands."""
    accel, steer_rate = pilot.control(plan_, longitudinal, state, t_now,
                                      params, pcfg)
    sx, sy, v, delta, psi = _core.bicycle_step(
        state.s_x, state.s_y, state.v, state.delta, state.psi,
        accel, steer_rate, dt,
        params.wheelbase, params.v_max, params.delta_max)
    return VehicleState(sx, sy, v, delta, psi)


def collision_partner(state: VehicleState, t: float,
                      scenario: Scenario) -> Optional[str]:
    """Id of the first challenger whose footprint overlaps the ego's, or
    None. Challenger order is the scenario's track order."""
    hl = scenario.ego_params.length / 2.0
    hw = scenario.ego_params.width / 2.0
    for track in scenario.challengers:
        cx, cy, _, cpsi = track.raw_state(t)
        if _core.rects_overlap(state.s_x, state.s_y, state.psi, hl, hw,
                               cx, cy, cpsi,
                               track.length / 2.0, track.width / 2.0):
            return track.id
    return None


def is_offroad(state: VehicleState, scenario: Scenario) -> bool:
    road = scenario.road
    return _core.rect_outside_box(
        state.s_x, state.s_y, state.psi,
        scenario.ego_params.length / 2.0, scenario.ego_params.width / 2.0,
        road.x_min, road.x_max, road.y_min, road.y_max)


def in_goal(state: VehicleState, scenario: Scenario) -> bool:
    lane = scenario.road.lane_of(state.s_y)
    return scenario.goal.admits(state.s_x, lane)
