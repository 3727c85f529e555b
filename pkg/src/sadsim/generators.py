"""Parameterized generators for the three synthetic critical-scenario
families, the decision-time filter, and dataset building.

Every critical scenario is certified during generation: its challenger
tracks pass the drivability check, a maintain-speed ego provably collides
(with at least the filter's decision window available), and a scripted
evasive driver provably reaches the goal. Easy scenarios instead require
the maintain ego itself to reach the goal. Draws failing any certificate
are resampled up to an attempt cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .env import EnvConfig, Observation, Reason
from .evaluation import run_episode
from .pilot import HighLevelAction, Lateral, Longitudinal
from .road import DEFAULT_PARAMS, DEFAULT_ROAD, RoadNetwork, VehicleState
from .scenario import (ChallengerTrack, GoalRegion, Scenario, TrajectoryPoint,
                       check_drivability, save_json)

DECISION_TIME_MIN = 6.5
MAX_ATTEMPTS = 100

DATASET_KINDS = ("A", "B", "cutout", "easy_A", "easy_B", "easy_cutout")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenParams:
    seed: int
    ego_speed: tuple[float, float] = (20.0, 35.0)
    gap: tuple[float, float] = (30.0, 80.0)
    challenger_decel: tuple[float, float] = (-8.0, -3.0)
    cutin_duration: tuple[float, float] = (2.0, 4.0)
    road: RoadNetwork = DEFAULT_ROAD
    dt: float = 0.1
    duration: float = 20.0
    easy: bool = False

    def __post_init__(self):
        for name in ("ego_speed", "gap", "cutin_duration"):
            lo, hi = getattr(self, name)
            if not (lo <= hi and lo > 0):
                raise ValueError(f"{name} range invalid: ({lo}, {hi})")
        lo, hi = self.challenger_decel
        if not (lo <= hi < 0):
            raise ValueError(f"challenger_decel must be negative: ({lo}, {hi})")


_EGO_X0 = 30.0
_GOAL_FRACTION = 0.7
_CAR_LEN = DEFAULT_PARAMS.length


# ---------------------------------------------------------------------------
# Scripted evasive driver (solvability certificate)


class EvadePolicy:
    """Changes lane away from a braking lead once time-to-collision drops
    below a threshold; maintains speed otherwise. Used only to certify
    that generated scenarios are solvable."""

    mode = "hierarchical"
    deterministic = True
    tag = "evade"

    def __init__(self, ttc_threshold: float = 6.0, close_gap: float = 12.0,
                 free_behind: float = 35.0, free_ahead: float = 20.0):
        self.ttc_threshold = ttc_threshold
        self.close_gap = close_gap
        self.free_behind = free_behind
        self.free_ahead = free_ahead

    def begin_episode(self, seed: int) -> None:
        pass

    def _threat(self, obs: Observation) -> bool:
        lead = obs.slots[0]
        if not lead.present:
            return False
        bumper_gap = lead.rel_s_x - _CAR_LEN
        if bumper_gap < self.close_gap:
            return True
        return (lead.rel_v < -0.5
                and bumper_gap / -lead.rel_v < self.ttc_threshold)

    def _free(self, obs: Observation, side: int) -> bool:
        lead = obs.slots[2 * side]
        rear = obs.slots[2 * side + 1]
        if lead.present and lead.rel_s_x < self.free_ahead:
            return False
        if rear.present and rear.rel_s_x > -self.free_behind:
            return False
        return True

    def act(self, obs: Observation) -> HighLevelAction:
        if not self._threat(obs):
            return HighLevelAction(Lateral.CENTER, Longitudinal.MAINTAIN)
        if self._free(obs, 1):
            return HighLevelAction(Lateral.LEFT, Longitudinal.MAINTAIN)
        if self._free(obs, 2):
            return HighLevelAction(Lateral.RIGHT, Longitudinal.MAINTAIN)
        return HighLevelAction(Lateral.CENTER, Longitudinal.HARD_BRAKE)


class _MaintainProbe:
    mode = "hierarchical"
    deterministic = True
    tag = "maintain"

    def begin_episode(self, seed: int) -> None:
        pass

    def act(self, obs: Observation) -> HighLevelAction:
        return HighLevelAction(Lateral.CENTER, Longitudinal.MAINTAIN)


_UNSHIELDED = EnvConfig(mode="hierarchical", shield_enabled=False)


# ---------------------------------------------------------------------------
# Track construction helpers


def _sigmoid01(u: float, k: float = 10.0) -> tuple[float, float]:
    """Normalized logistic on [0, 1] hitting exactly 0 and 1; returns
    (value, derivative w.r.t. u)."""
    s = 1.0 / (1.0 + math.exp(-k * (u - 0.5)))
    s0 = 1.0 / (1.0 + math.exp(k * 0.5))
    s1 = 1.0 / (1.0 + math.exp(-k * 0.5))
    ds = k * s * (1.0 - s) / (s1 - s0)
    return (s - s0) / (s1 - s0), ds


@dataclass(frozen=True)
class _LateralMove:
    t_start: float
    t_end: float
    y_from: float
    y_to: float

    def at(self, t: float) -> tuple[float, float]:
        if t <= self.t_start:
            return self.y_from, 0.0
        if t >= self.t_end:
            return self.y_to, 0.0
        T = self.t_end - self.t_start
        s, ds = _sigmoid01((t - self.t_start) / T)
        dy = self.y_to - self.y_from
        return self.y_from + dy * s, dy * ds / T


def _build_track(tid: str, x0: float, y0: float, v0: float, dt: float,
                 n: int, brake_start: float = math.inf,
                 decel: float = 0.0,
                 move: Optional[_LateralMove] = None) -> ChallengerTrack:
    """Cruise / lateral-move / brake-to-stop profile sampled on the grid.

    Speed is constant until brake_start then ramps to zero at `decel`
    (negative); the lateral move redistributes the constant speed between
    the axes so per-sample speed stays exact.
    """
    points = []
    x = x0
    for k in range(n + 1):
        t = k * dt
        if move is not None:
            y, dy = move.at(t)
        else:
            y, dy = y0, 0.0
        if t < brake_start:
            v = v0
        else:
            v = max(0.0, v0 + decel * (t - brake_start))
        dx = math.sqrt(max(v * v - dy * dy, 1e-6)) if dy != 0.0 else v
        psi = math.atan2(dy, dx) if dy != 0.0 else 0.0
        points.append(TrajectoryPoint(t, x, y, v, psi))
        # trapezoid in the longitudinal axis keeps positions consistent
        # with the sampled speeds
        t_next = (k + 1) * dt
        if move is not None:
            _, dy_next = move.at(t_next)
        else:
            dy_next = 0.0
        if t_next < brake_start:
            v_next = v0
        else:
            v_next = max(0.0, v0 + decel * (t_next - brake_start))
        dx_next = (math.sqrt(max(v_next * v_next - dy_next * dy_next, 1e-6))
                   if dy_next != 0.0 else v_next)
        x += 0.5 * (dx + dx_next) * dt
    return ChallengerTrack(tid, DEFAULT_PARAMS.length, DEFAULT_PARAMS.width,
                           points)


def _assemble(kind: str, seed: int, road: RoadNetwork, dt: float,
              duration: float, ego_lane: int, v_e: float,
              challengers: list[ChallengerTrack], easy: bool,
              draws: dict) -> Scenario:
    goal_min = _EGO_X0 + _GOAL_FRACTION * v_e * duration
    sid = f"{kind}-{'easy-' if easy else ''}{seed & 0xFFFFFFFFFFFFFFFF:016x}"
    return Scenario(
        id=sid, kind=kind, road=road, dt=dt, duration=duration,
        ego_start=VehicleState(_EGO_X0, road.centerline_y(ego_lane), v_e),
        ego_lane=ego_lane, ego_params=DEFAULT_PARAMS,
        goal=GoalRegion(goal_min, road.x_max, None),
        challengers=challengers,
        meta={"seed": seed, "easy": easy, "draws": draws},
    )


def _certify(scenario: Scenario, easy: bool,
             expect_collision_with: Optional[str] = None) -> bool:
    if not check_drivability(scenario).feasible:
        return False
    reason, t_end, _, info = run_episode(scenario, _MaintainProbe(),
                                         _UNSHIELDED)
    if easy:
        return reason is Reason.GOAL_REACHED
    if reason is not Reason.COLLISION or t_end < DECISION_TIME_MIN:
        return False
    if (expect_collision_with is not None
            and info.get("collision_with") != expect_collision_with):
        return False
    evade_reason, _, _, _ = run_episode(scenario, EvadePolicy(), _UNSHIELDED)
    return evade_reason is Reason.GOAL_REACHED


# ---------------------------------------------------------------------------
# Generators


def generate_type_a(params: GenParams) -> Scenario:
    """Ego behind a same-lane challenger that brakes to a stop (critical)
    or cruises clear (easy)."""
    rng = np.random.default_rng(params.seed)
    road = params.road
    n = int(round(params.duration / params.dt))
    for _ in range(MAX_ATTEMPTS):
        ego_lane = int(rng.integers(road.lane_count))
        v_e = float(rng.uniform(*params.ego_speed))
        y = road.centerline_y(ego_lane)
        if params.easy:
            gap = float(rng.uniform(max(params.gap[0], 40.0), params.gap[1]))
            v_c = v_e + float(rng.uniform(0.5, 4.0))
            track = _build_track("c0", _EGO_X0 + gap + _CAR_LEN, y, v_c,
                                 params.dt, n)
            draws = {"gap": gap, "v_c": v_c}
        else:
            gap = float(rng.uniform(*params.gap))
            decel = float(rng.uniform(*params.challenger_decel))
            t_brake = float(rng.uniform(1.0, 5.0))
            track = _build_track("c0", _EGO_X0 + gap + _CAR_LEN, y, v_e,
                                 params.dt, n, brake_start=t_brake,
                                 decel=decel)
            draws = {"gap": gap, "decel": decel, "t_brake": t_brake}
        scenario = _assemble("TypeA", params.seed, road, params.dt,
                             params.duration, ego_lane, v_e, [track],
                             params.easy, draws)
        if _certify(scenario, params.easy):
            return scenario
    raise GenerationError(f"type A generation exhausted (seed {params.seed})")


def _adjacent_lane(rng, road: RoadNetwork, lane: int) -> int:
    options = [l for l in (lane + 1, lane - 1) if road.is_valid_lane(l)]
    return int(options[int(rng.integers(len(options)))])


def generate_type_b(params: GenParams) -> Scenario:
    """Adjacent-lane challenger cuts in ahead of the ego, then brakes
    (critical) or keeps cruising (easy)."""
    rng = np.random.default_rng(params.seed)
    road = params.road
    n = int(round(params.duration / params.dt))
    for _ in range(MAX_ATTEMPTS):
        ego_lane = int(rng.integers(road.lane_count))
        side = _adjacent_lane(rng, road, ego_lane)
        v_e = float(rng.uniform(*params.ego_speed))
        t_cut = float(rng.uniform(0.5, 2.5))
        t_trans = float(rng.uniform(*params.cutin_duration))
        move = _LateralMove(t_cut, t_cut + t_trans,
                            road.centerline_y(side),
                            road.centerline_y(ego_lane))
        if params.easy:
            land_gap = float(rng.uniform(45.0, 70.0))
            v_c = v_e + float(rng.uniform(0.0, 3.0))
            track = _build_track("c0", _EGO_X0 + land_gap + _CAR_LEN,
                                 road.centerline_y(side), v_c, params.dt, n,
                                 move=move)
            draws = {"land_gap": land_gap, "v_c": v_c, "t_cut": t_cut,
                     "t_trans": t_trans}
        else:
            land_gap = float(rng.uniform(12.0, 30.0))
            t_hold = float(rng.uniform(0.3, 1.5))
            decel = float(rng.uniform(*params.challenger_decel))
            track = _build_track("c0", _EGO_X0 + land_gap + _CAR_LEN,
                                 road.centerline_y(side), v_e, params.dt, n,
                                 brake_start=t_cut + t_trans + t_hold,
                                 decel=decel, move=move)
            draws = {"land_gap": land_gap, "decel": decel, "t_cut": t_cut,
                     "t_trans": t_trans, "t_hold": t_hold}
        scenario = _assemble("TypeB", params.seed, road, params.dt,
                             params.duration, ego_lane, v_e, [track],
                             params.easy, draws)
        if _certify(scenario, params.easy):
            return scenario
    raise GenerationError(f"type B generation exhausted (seed {params.seed})")


def generate_cutout(params: GenParams) -> Scenario:
    """A lead vehicle exits the ego lane, revealing a second vehicle that
    brakes hard (critical) or cruises clear (easy)."""
    rng = np.random.default_rng(params.seed)
    road = params.road
    n = int(round(params.duration / params.dt))
    for _ in range(MAX_ATTEMPTS):
        ego_lane = int(rng.integers(road.lane_count))
        side = _adjacent_lane(rng, road, ego_lane)
        v_e = float(rng.uniform(*params.ego_speed))
        y_ego = road.centerline_y(ego_lane)
        g1 = float(rng.uniform(18.0, 35.0))
        g12 = float(rng.uniform(22.0, 40.0))
        t_cut = float(rng.uniform(1.0, 3.0))
        t_trans = float(rng.uniform(*params.cutin_duration))
        move = _LateralMove(t_cut, t_cut + t_trans, y_ego,
                            road.centerline_y(side))
        near = _build_track("c0", _EGO_X0 + g1 + _CAR_LEN, y_ego, v_e,
                            params.dt, n, move=move)
        far_x0 = _EGO_X0 + g1 + g12 + 2.0 * _CAR_LEN
        if params.easy:
            v_far = v_e + float(rng.uniform(0.5, 3.0))
            far = _build_track("c1", far_x0, y_ego, v_far, params.dt, n)
            draws = {"g1": g1, "g12": g12, "t_cut": t_cut,
                     "t_trans": t_trans, "v_far": v_far}
        else:
            decel = float(rng.uniform(-8.0, -5.0))
            far = _build_track("c1", far_x0, y_ego, v_e, params.dt, n,
                               brake_start=t_cut, decel=decel)
            draws = {"g1": g1, "g12": g12, "t_cut": t_cut,
                     "t_trans": t_trans, "decel": decel}
        scenario = _assemble("Cutout", params.seed, road, params.dt,
                             params.duration, ego_lane, v_e, [near, far],
                             params.easy, draws)
        if _certify(scenario, params.easy,
                    expect_collision_with=None if params.easy else "c1"):
            return scenario
    raise GenerationError(f"cutout generation exhausted (seed {params.seed})")


_GENERATORS = {
    "A": generate_type_a,
    "B": generate_type_b,
    "cutout": generate_cutout,
}


def generate(kind: str, params: GenParams) -> Scenario:
    """Dispatch by dataset kind token (`easy_` prefix selects the easy
    variant)."""
    easy = kind.startswith("easy_")
    base = kind.removeprefix("easy_")
    if base not in _GENERATORS:
        raise ValueError(f"unknown scenario kind {kind!r}")
    return _GENERATORS[base](replace(params, easy=easy))


# ---------------------------------------------------------------------------
# Decision-time filter


def decision_time(scenario: Scenario) -> float:
    """Seconds until a maintain-policy ego first collides; +inf if the
    passive rollout never collides."""
    reason, t_end, _, _ = run_episode(scenario, _MaintainProbe(), _UNSHIELDED)
    return t_end if reason is Reason.COLLISION else math.inf


def filter_scenarios(scenarios: Sequence[Scenario],
                     times: Optional[Sequence[float]] = None
                     ) -> tuple[list[Scenario], list[Scenario]]:
    """Partition into (kept, rejected): kept scenarios leave at least the
    minimum decision window (inclusive threshold) or never endanger a
    passive ego."""
    if times is None:
        times = [decision_time(s) for s in scenarios]
    kept, rejected = [], []
    for scenario, t in zip(scenarios, times):
        (kept if t >= DECISION_TIME_MIN else rejected).append(scenario)
    return kept, rejected


# ---------------------------------------------------------------------------
# Dataset building


MANIFEST_SCHEMA_VERSION = 1


def _child_seed(seed: int, split: int, kind_idx: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(split, kind_idx, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_dataset(out_dir, train_counts: dict[str, int],
                  test_counts: dict[str, int], seed: int,
                  base: Optional[GenParams] = None) -> dict:
    """Generate scenario files plus a manifest with disjoint train/test
    seed streams. Returns the manifest dict (also written to
    manifest.json). Counts are keyed by DATASET_KINDS tokens."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = base if base is not None else GenParams(seed=0)
    manifest = {"schema_version": MANIFEST_SCHEMA_VERSION, "seed": seed,
                "train": [], "test": []}
    for split_idx, (split, counts) in enumerate(
            (("train", train_counts), ("test", test_counts))):
        for kind in counts:
            if kind not in DATASET_KINDS:
                raise ValueError(f"unknown dataset kind {kind!r}; "
                                 f"expected one of {DATASET_KINDS}")
        for kind_idx, kind in enumerate(DATASET_KINDS):
            count = counts.get(kind, 0)
            for i in range(count):
                child = _child_seed(seed, split_idx, kind_idx, i)
                try:
                    scenario = generate(kind, replace(base, seed=child))
                except GenerationError as exc:
                    raise GenerationError(
                        f"{split}/{kind}[{i}] (seed {child}): {exc}") from exc
                name = f"{split}_{kind}_{i:04d}.json"
                (out / name).write_bytes(save_json(scenario))
                manifest[split].append({
                    "path": name, "id": scenario.id, "kind": scenario.kind,
                    "easy": kind.startswith("easy_"), "seed": child,
                })
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n",
                             encoding="utf-8")
    return manifest


def load_manifest(path) -> dict:
    """Read a manifest and resolve scenario paths relative to it."""
    p = Path(path)
    manifest = json.loads(p.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema_version "
                         f"{manifest.get('schema_version')!r}")
    for split in ("train", "test"):
        for entry in manifest.get(split, []):
            entry["path"] = str((p.parent / entry["path"]).resolve())
    return manifest
