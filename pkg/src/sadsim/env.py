"""Episodic gym-style environment over one scenario.

Hierarchical mode: one step = one decision tick (default 1.0 s = 10 sim
sub-steps); the proposed option pair is screened by the shield, planned by
the pilot, and executed sub-step by sub-step with termination checked
after every sub-step. Continuous mode: one step = one sim sub-step driven
directly by (acceleration, steering rate); the shield is disabled.

Reward is sparse: nonzero only on the terminal step. An environment
instance is strictly single-threaded; run several instances for parallel
rollouts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import pilot, shield, sim
from .pilot import HighLevelAction, Longitudinal, PilotConfig
from .road import VehicleState
from .scenario import Scenario


class Reason(enum.Enum):
    GOAL_REACHED = "GoalReached"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"
    STANDSTILL = "Standstill"
    OFFROAD = "Offroad"


class TraceRecorder(list):
    """Collects one record per executed sub-step; serializes to
    JSON-lines for replay."""

    def to_jsonl(self) -> str:
        import json
        return "".join(json.dumps(rec, separators=(",", ":")) + "\n"
                       for rec in self)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


class EpisodeOver(RuntimeError):
    """Raised when stepping an episode that already terminated."""


class ModeError(RuntimeError):
    """Raised when calling the step entry point of the other mode."""


@dataclass(frozen=True)
class NeighborSlot:
    present: bool
    rel_s_x: float
    rel_v: float


@dataclass(frozen=True)
class Observation:
    """Ego speed/lane/offset/goal distance plus six neighbor slots in
    fixed order: ego-lead, ego-rear, left-lead, left-rear, right-lead,
    right-rear."""

    ego_v: float
    ego_lane: int
    lateral_offset: float
    dist_to_goal: float
    slots: tuple[NeighborSlot, ...]

    def to_vector(self, scaling: "ObservationScaling") -> np.ndarray:
        return scaling.vectorize(self)


SLOT_NAMES = ("ego_lead", "ego_rear", "left_lead", "left_rear",
              "right_lead", "right_rear")

OBS_DIM = 4 + 3 * len(SLOT_NAMES)


@dataclass(frozen=True)
class ObservationScaling:
    """Min-max ranges mapping raw features into [-1, 1]."""

    v_max: float = 50.0
    lane_max: float = 5.0
    lateral_max: float = 3.5
    dist_max: float = 1000.0
    rel_x_max: float = 200.0
    rel_v_max: float = 50.0

    def _unit(self, x: float, lo: float, hi: float) -> float:
        u = 2.0 * (x - lo) / (hi - lo) - 1.0
        return min(max(u, -1.0), 1.0)

    def vectorize(self, obs: Observation) -> np.ndarray:
        out = np.empty(OBS_DIM, dtype=np.float64)
        out[0] = self._unit(obs.ego_v, 0.0, self.v_max)
        out[1] = self._unit(obs.ego_lane, 0.0, self.lane_max)
        out[2] = self._unit(obs.lateral_offset, -self.lateral_max, self.lateral_max)
        out[3] = self._unit(obs.dist_to_goal, 0.0, self.dist_max)
        for i, slot in enumerate(obs.slots):
            base = 4 + 3 * i
            out[base] = 1.0 if slot.present else -1.0
            out[base + 1] = self._unit(slot.rel_s_x, -self.rel_x_max, self.rel_x_max)
            out[base + 2] = self._unit(slot.rel_v, -self.rel_v_max, self.rel_v_max)
        return out


@dataclass(frozen=True)
class StepOutcome:
    obs: Observation
    reward: float
    terminated: bool
    reason: Optional[Reason]
    info: dict


@dataclass(frozen=True)
class EnvConfig:
    mode: str = "hierarchical"  # or "continuous"
    shield_enabled: bool = True
    tick_duration: float = 1.0
    standstill_speed: float = 0.1
    standstill_hold: float = 3.0
    neighbor_sentinel: float = 200.0
    rewards: dict = field(default_factory=lambda: {
        Reason.GOAL_REACHED: 1.0,
        Reason.COLLISION: -1.0,
        Reason.OFFROAD: -1.0,
        Reason.TIMEOUT: -0.5,
        Reason.STANDSTILL: -0.5,
    })
    scaling: ObservationScaling = ObservationScaling()
    shield: shield.ShieldConfig = shield.DEFAULT_SHIELD
    pilot: PilotConfig = pilot.DEFAULT_PILOT

    def __post_init__(self):
        if self.mode not in ("hierarchical", "continuous"):
            raise ValueError(f"unknown mode {self.mode!r}")
        # The lateral shield needs the option abstraction; continuous mode
        # drives actuators directly, so it always runs unshielded.
        if self.mode == "continuous" and self.shield_enabled:
            object.__setattr__(self, "shield_enabled", False)
        object.__setattr__(
            self, "shield",
            replace(self.shield, tick_duration=self.tick_duration))


class HighwayEnv:
    """Reset/step loop over one scenario with open-loop challengers."""

    def __init__(self, scenario: Optional[Scenario] = None,
                 config: EnvConfig = EnvConfig(), trace=None):
        self.config = config
        self.scenario = scenario
        self.trace = trace
        self.substeps_total = 0
        self._seed = 0
        self._episode_live = False
        self._state: Optional[VehicleState] = None
        self._k = 0
        self._plan: Optional[pilot.ManeuverPlan] = None
        self._standstill_count = 0
        self._collision_with: Optional[str] = None

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed: int = 0,
              scenario: Optional[Scenario] = None) -> Observation:
        if scenario is not None:
            self.scenario = scenario
        if self.scenario is None:
            raise ValueError("no scenario bound to the environment")
        self._seed = int(seed)
        self._state = self.scenario.ego_start
        self._k = 0
        self._plan = None
        self._standstill_count = 0
        self._collision_with = None
        self._episode_live = True
        return self.observe()

    @property
    def t(self) -> float:
        return self._k * self.scenario.dt

    @property
    def terminated(self) -> bool:
        return not self._episode_live

    def step(self, action: HighLevelAction) -> StepOutcome:
        """One decision tick in hierarchical mode."""
        if self.config.mode != "hierarchical":
            raise ModeError("step() requires hierarchical mode; "
                            "use step_continuous()")
        self._require_live()
        scenario = self.scenario
        dt = scenario.dt
        pcfg = self.config.pilot

        overridden = False
        override_reason = shield.OverrideReason.NONE
        applied = action
        if self.config.shield_enabled:
            verdict = shield.screen(action, self._state, scenario, self.t,
                                    self.config.shield, pcfg, self._plan)
            applied = verdict.approved
            overridden = verdict.overridden
            override_reason = verdict.reason

        self._plan = pilot.plan(applied, self._state, scenario.road, self.t,
                                self._plan, pcfg)
        n_sub = max(1, int(round(self.config.tick_duration / dt)))
        reason = None
        for _ in range(n_sub):
            reason = self._advance_substep(applied.longitudinal, applied, pcfg)
            if reason is not None:
                break
        return self._outcome(reason, overridden, override_reason)

    def step_continuous(self, accel: float, steer_rate: float) -> StepOutcome:
        """One sim sub-step in continuous mode; commands are clamped to
        the actuator envelope."""
        if self.config.mode != "continuous":
            raise ModeError("step_continuous() requires continuous mode; "
                            "use step()")
        self._require_live()
        if not (math.isfinite(accel) and math.isfinite(steer_rate)):
            raise ValueError("accel and steer_rate must be finite")
        params = self.scenario.ego_params
        accel = min(max(accel, params.a_min), params.a_max)
        steer_rate = min(max(steer_rate, -params.vdelta_max), params.vdelta_max)
        reason = self._advance_raw(accel, steer_rate, (accel, steer_rate))
        return self._outcome(reason, False, shield.OverrideReason.NONE)

    # -- internals ---------------------------------------------------------

    def _require_live(self):
        if self.scenario is None or self._state is None:
            raise EpisodeOver("no episode: call reset() first")
        if not self._episode_live:
            raise EpisodeOver("episode already terminated: call reset()")

    def _advance_substep(self, longitudinal: Longitudinal,
                         applied: HighLevelAction, pcfg) -> Optional[Reason]:
        scenario = self.scenario
        dt = scenario.dt
        self._state = sim.substep(self._state, self._plan, longitudinal,
                                  self.t, dt, scenario.ego_params, pcfg)
        return self._after_move(applied.indices)

    def _advance_raw(self, accel: float, steer_rate: float,
                     action_record) -> Optional[Reason]:
        from . import _core
        scenario = self.scenario
        params = scenario.ego_params
        s = self._state
        sx, sy, v, delta, psi = _core.bicycle_step(
            s.s_x, s.s_y, s.v, s.delta, s.psi, accel, steer_rate,
            scenario.dt, params.wheelbase, params.v_max, params.delta_max)
        self._state = VehicleState(sx, sy, v, delta, psi)
        return self._after_move(action_record)

    def _after_move(self, action_record) -> Optional[Reason]:
        scenario = self.scenario
        self._k += 1
        self.substeps_total += 1
        t = self.t
        reason = None
        partner = sim.collision_partner(self._state, t, scenario)
        if partner is not None:
            reason = Reason.COLLISION
            self._collision_with = partner
        elif sim.is_offroad(self._state, scenario):
            reason = Reason.OFFROAD
        elif sim.in_goal(self._state, scenario):
            reason = Reason.GOAL_REACHED
        else:
            if self._state.v < self.config.standstill_speed:
                self._standstill_count += 1
            else:
                self._standstill_count = 0
            hold = int(round(self.config.standstill_hold / scenario.dt))
            if self._standstill_count >= hold:
                reason = Reason.STANDSTILL
            elif self._k >= scenario.n_substeps:
                reason = Reason.TIMEOUT
        if reason is not None:
            self._episode_live = False
        if self.trace is not None:
            self._record_trace(action_record, reason)
        return reason

    def _record_trace(self, action_record, reason):
        s = self._state
        record = {
            "t": round(self.t, 9),
            "ego": {"s_x": s.s_x, "s_y": s.s_y, "v": s.v,
                    "delta": s.delta, "psi": s.psi},
            "challengers": [
                dict(zip(("id", "s_x", "s_y", "v", "psi"),
                         (c.id, *c.raw_state(self.t))))
                for c in self.scenario.challengers
            ],
            "action": list(action_record),
            "reason": reason.value if reason is not None else None,
        }
        self.trace.append(record)

    def _outcome(self, reason, overridden, override_reason) -> StepOutcome:
        reward = self.config.rewards[reason] if reason is not None else 0.0
        info = {
            "t": self.t,
            "shield_overridden": overridden,
            "shield_reason": override_reason.value,
            "substeps": self._k,
        }
        if reason is Reason.COLLISION:
            info["collision_with"] = self._collision_with
        return StepOutcome(obs=self.observe(), reward=reward,
                           terminated=reason is not None, reason=reason,
                           info=info)

    # -- observation -------------------------------------------------------

    def observe(self) -> Observation:
        return encode_observation(self._state, self.t, self.scenario,
                                  self.config)


def encode_observation(state: VehicleState, t: float, scenario: Scenario,
                       config: EnvConfig = EnvConfig()) -> Observation:
    """Six-slot neighbor encoding around the ego.

    Each (lane, lead/rear) cell holds the nearest challenger by |rel_s_x|;
    relative quantities are challenger minus ego. Absent cells carry the
    signed distance sentinel and zero relative speed. An ego off the
    carriageway falls back to the nearest lane.
    """
    road = scenario.road
    lane = road.lane_of(state.s_y)
    if lane is None:
        lane = road.nearest_lane(state.s_y)
    sentinel = config.neighbor_sentinel

    # slot index -> (lane, is_lead): ego, left (lane+1), right (lane-1)
    cells = (lane, lane + 1, lane - 1)
    best: list[Optional[tuple[float, float]]] = [None] * 6
    for track in scenario.challengers:
        cx, c_sy, cv, _ = track.raw_state(t)
        c_lane = road.lane_of(c_sy)
        if c_lane is None:
            continue
        rel_x = cx - state.s_x
        for cell_idx, cell_lane in enumerate(cells):
            if c_lane != cell_lane:
                continue
            slot_idx = 2 * cell_idx + (0 if rel_x >= 0 else 1)
            cur = best[slot_idx]
            if cur is None or abs(rel_x) < abs(cur[0]):
                best[slot_idx] = (rel_x, cv - state.v)
    slots = []
    for slot_idx in range(6):
        entry = best[slot_idx]
        if slot_idx // 2 > 0 and not road.is_valid_lane(cells[slot_idx // 2]):
            entry = None
        if entry is None:
            sign = 1.0 if slot_idx % 2 == 0 else -1.0
            slots.append(NeighborSlot(False, sign * sentinel, 0.0))
        else:
            slots.append(NeighborSlot(True, entry[0], entry[1]))

    return Observation(
        ego_v=state.v,
        ego_lane=lane,
        lateral_offset=state.s_y - road.centerline_y(lane),
        dist_to_goal=max(0.0, scenario.goal.s_x_min - state.s_x),
        slots=tuple(slots),
    )
