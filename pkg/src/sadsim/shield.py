"""Safety layer: screens each proposed high-level action by rolling out
its pilot-executed trajectory against the replayed challengers and
substituting a safer fallback when the rollout predicts a collision or an
offroad excursion.

The rollout uses the same integrator and pilot as execution, so an
approved action's first decision tick is exactly what the environment will
execute.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from . import pilot, sim
from .pilot import HighLevelAction, Lateral, Longitudinal, ManeuverPlan, PilotConfig
from .road import VehicleState
from .scenario import Scenario


class OverrideReason(enum.Enum):
    NONE = "none"
    PREDICTED_COLLISION = "predicted_collision"
    PREDICTED_OFFROAD = "predicted_offroad"
    NO_ADJACENT_LANE = "no_adjacent_lane"


@dataclass(frozen=True)
class ShieldVerdict:
    approved: HighLevelAction
    overridden: bool
    reason: OverrideReason


@dataclass(frozen=True)
class ShieldConfig:
    enabled: bool = True
    horizon: float = 5.0  # >= one full committed lane change
    tick_duration: float = 1.0


DEFAULT_SHIELD = ShieldConfig()


def rollout_unsafe(action: HighLevelAction, ego: VehicleState,
                   scenario: Scenario, k_now: int,
                   active_plan: Optional[ManeuverPlan],
                   config: ShieldConfig, pcfg: PilotConfig
                   ) -> Optional[OverrideReason]:
    """Simulate the pilot executing `action` for the shield horizon.

    Returns the predicted failure (collision/offroad) or None if the
    rollout is safe. Reaching the goal region ends the rollout safely;
    challenger replay clamp-holds past the scenario duration.
    """
    dt = scenario.dt
    road = scenario.road
    tick_sub = max(1, int(round(config.tick_duration / dt)))
    n_sub = max(1, int(round(config.horizon / dt)))
    state = ego
    plan_ = active_plan
    k = k_now
    for i in range(n_sub):
        if i % tick_sub == 0:
            plan_ = pilot.plan(action, state, road, k * dt, plan_, pcfg)
        state = sim.substep(state, plan_, action.longitudinal, k * dt, dt,
                            scenario.ego_params, pcfg)
        k += 1
        t = k * dt
        if sim.collision_partner(state, t, scenario) is not None:
            return OverrideReason.PREDICTED_COLLISION
        if sim.is_offroad(state, scenario):
            return OverrideReason.PREDICTED_OFFROAD
        if sim.in_goal(state, scenario):
            return None
    return None


def screen(proposed: HighLevelAction, ego: VehicleState, scenario: Scenario,
           t_now: float, config: ShieldConfig = DEFAULT_SHIELD,
           pcfg: PilotConfig = pilot.DEFAULT_PILOT,
           active_plan: Optional[ManeuverPlan] = None) -> ShieldVerdict:
    """Approve the proposed action or the first safe fallback.

    Fallback ladder: degrade a lane change with no adjacent lane to
    keep-lane, then try [same lateral + hard brake, keep-lane + hard
    brake]; if nothing is safe, approve keep-lane + hard brake as the
    least-harm default.
    """
    k_now = int(round(t_now / scenario.dt))
    road = scenario.road
    candidate = proposed
    reason = OverrideReason.NONE

    if candidate.lateral is not Lateral.CENTER:
        lane = road.nearest_lane(ego.s_y)
        target = lane + 1 if candidate.lateral is Lateral.LEFT else lane - 1
        if not road.is_valid_lane(target):
            candidate = HighLevelAction(Lateral.CENTER, candidate.longitudinal)
            reason = OverrideReason.NO_ADJACENT_LANE

    approved = HighLevelAction(Lateral.CENTER, Longitudinal.HARD_BRAKE)
    ladder = list(dict.fromkeys([
        candidate,
        HighLevelAction(candidate.lateral, Longitudinal.HARD_BRAKE),
        approved,
    ]))
    for i, entry in enumerate(ladder):
        failure = rollout_unsafe(entry, ego, scenario, k_now, active_plan,
                                 config, pcfg)
        if failure is None:
            approved = entry
            break
        if i == 0 and reason is OverrideReason.NONE:
            reason = failure

    overridden = approved != proposed
    if not overridden:
        reason = OverrideReason.NONE
    elif reason is OverrideReason.NONE:
        # Proposed rollout was safe but degradation changed the action.
        reason = OverrideReason.NO_ADJACENT_LANE
    return ShieldVerdict(approved=approved, overridden=overridden, reason=reason)
