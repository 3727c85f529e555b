"""Scenario data model, native JSON format, and drivability verification.

A scenario bundles the road, the ego start/goal, and open-loop challenger
tracks sampled on a fixed time grid. Scenarios are immutable after
construction and safe for concurrent shared reads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core
from .road import Footprint, RoadNetwork, VehicleParams, VehicleState

SCHEMA_VERSION = 1

KINDS = ("TypeA", "TypeB", "Cutout", "RealRoad", "Other")

# Generous physical envelopes for challenger feasibility.
CHALLENGER_ACCEL_BOUNDS = (-9.5, 4.0)
CHALLENGER_YAW_RATE_MAX = 0.5

_GRID_TOL = 1e-6


class ScenarioError(ValueError):
    """Format or invariant violation; `path` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    s_x: float
    s_y: float
    v: float
    psi: float

    def __post_init__(self):
        for name in ("t", "s_x", "s_y", "v", "psi"):
            if not math.isfinite(getattr(self, name)):
                raise ScenarioError(f"{name} must be finite", name)
        if self.t < 0:
            raise ScenarioError(f"t must be >= 0, got {self.t}", "t")


class ChallengerTrack:
    """Time-ordered samples at fixed spacing for one non-ego vehicle."""

    def __init__(self, track_id: str, length: float, width: float,
                 points: list[TrajectoryPoint]):
        if len(points) < 2:
            raise ScenarioError("track needs at least 2 points", "points")
        if not (length > 0 and width > 0):
            raise ScenarioError("dims must be > 0", "dims")
        dt = points[1].t - points[0].t
        if dt <= 0:
            raise ScenarioError("points must have strictly increasing t", "points")
        for i in range(1, len(points)):
            step = points[i].t - points[i - 1].t
            if abs(step - dt) > _GRID_TOL:
                raise ScenarioError(
                    f"non-constant spacing at index {i}: {step} vs {dt}",
                    f"points[{i}].t")
        self.id = str(track_id)
        self.length = float(length)
        self.width = float(width)
        self.points = tuple(points)
        self.dt = float(dt)
        self.t0 = float(points[0].t)
        self.t_end = float(points[-1].t)
        self._sx = np.array([p.s_x for p in points], dtype=np.float64)
        self._sy = np.array([p.s_y for p in points], dtype=np.float64)
        self._v = np.array([p.v for p in points], dtype=np.float64)
        self._psi = np.array([p.psi for p in points], dtype=np.float64)

    def __eq__(self, other):
        return (isinstance(other, ChallengerTrack)
                and self.id == other.id
                and self.length == other.length
                and self.width == other.width
                and self.points == other.points)

    def __repr__(self):
        return (f"ChallengerTrack(id={self.id!r}, n={len(self.points)}, "
                f"span=[{self.t0}, {self.t_end}])")

    def state_at(self, t: float) -> TrajectoryPoint:
        """Sample at time t: exact on grid points, linear interpolation of
        position/velocity in between, nearest-sample heading, clamp-hold
        outside the recorded span."""
        sx, sy, v, psi = _core.track_state_at(
            self._sx, self._sy, self._v, self._psi, self.t0, self.dt, t)
        return TrajectoryPoint(max(t, 0.0), sx, sy, v, psi)

    def footprint_at(self, t: float) -> Footprint:
        sx, sy, _, psi = _core.track_state_at(
            self._sx, self._sy, self._v, self._psi, self.t0, self.dt, t)
        return Footprint(sx, sy, psi, self.length / 2.0, self.width / 2.0)

    def raw_state(self, t: float):
        """(s_x, s_y, v, psi) without dataclass wrapping (hot path)."""
        return _core.track_state_at(
            self._sx, self._sy, self._v, self._psi, self.t0, self.dt, t)


def challenger_state_at(track: ChallengerTrack, t: float) -> TrajectoryPoint:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return track.state_at(t)


@dataclass(frozen=True)
class GoalRegion:
    """Longitudinal interval plus an optional lane restriction
    (allowed_lanes None means any lane)."""

    s_x_min: float
    s_x_max: float
    allowed_lanes: Optional[frozenset[int]] = None

    def __post_init__(self):
        if not self.s_x_min < self.s_x_max:
            raise ScenarioError("require s_x_min < s_x_max", "goal")
        if self.allowed_lanes is not None:
            object.__setattr__(self, "allowed_lanes", frozenset(self.allowed_lanes))
            if not self.allowed_lanes:
                raise ScenarioError("allowed_lanes must not be empty", "goal.allowed_lanes")

    def admits(self, s_x: float, lane: Optional[int]) -> bool:
        if not (self.s_x_min <= s_x <= self.s_x_max):
            return False
        if self.allowed_lanes is None:
            return lane is not None
        return lane in self.allowed_lanes


@dataclass
class Scenario:
    id: str
    kind: str
    road: RoadNetwork
    dt: float
    duration: float
    ego_start: VehicleState
    ego_lane: int
    ego_params: VehicleParams
    goal: GoalRegion
    challengers: list[ChallengerTrack]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def n_substeps(self) -> int:
        return int(round(self.duration / self.dt))

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown kind {self.kind!r}", "kind")
        if not self.dt > 0:
            raise ScenarioError("dt must be > 0", "dt")
        n = round(self.duration / self.dt)
        if n < 1 or abs(self.duration - n * self.dt) > _GRID_TOL:
            raise ScenarioError(
                f"duration {self.duration} is not a positive multiple of dt {self.dt}",
                "duration")
        if not self.road.is_valid_lane(self.ego_lane):
            raise ScenarioError(f"ego lane {self.ego_lane} invalid", "ego.lane")
        if self.goal.allowed_lanes is not None:
            for lane in self.goal.allowed_lanes:
                if not self.road.is_valid_lane(lane):
                    raise ScenarioError(f"goal lane {lane} invalid",
                                        "goal.allowed_lanes")
        seen = set()
        for i, track in enumerate(self.challengers):
            if track.id in seen:
                raise ScenarioError(f"duplicate challenger id {track.id!r}",
                                    f"challengers[{i}].id")
            seen.add(track.id)
            if track.t0 > _GRID_TOL or track.t_end < self.duration - _GRID_TOL:
                raise ScenarioError(
                    f"track spans [{track.t0}, {track.t_end}], must cover "
                    f"[0, {self.duration}]", f"challengers[{i}]")
        ego_fp = self.ego_start.footprint(self.ego_params)
        for i, track in enumerate(self.challengers):
            if _rects_overlap(ego_fp, track.footprint_at(0.0)):
                raise ScenarioError(
                    f"ego overlaps challenger {track.id!r} at t=0",
                    f"challengers[{i}]")


def _rects_overlap(a: Footprint, b: Footprint) -> bool:
    return _core.rects_overlap(
        a.center_x, a.center_y, a.heading, a.half_length, a.half_width,
        b.center_x, b.center_y, b.heading, b.half_length, b.half_width)


# ---------------------------------------------------------------------------
# Native JSON format


def _to_dict(s: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": s.id,
        "kind": s.kind,
        "road": {
            "lane_count": s.road.lane_count,
            "lane_width": s.road.lane_width,
            "length": s.road.length,
            "origin": [s.road.origin_x, s.road.origin_y],
        },
        "dt": s.dt,
        "duration": s.duration,
        "ego": {
            "start": {"s_x": s.ego_start.s_x, "s_y": s.ego_start.s_y,
                      "v": s.ego_start.v, "delta": s.ego_start.delta,
                      "psi": s.ego_start.psi},
            "lane": s.ego_lane,
            "params": {"length": s.ego_params.length, "width": s.ego_params.width,
                       "wheelbase": s.ego_params.wheelbase,
                       "a_min": s.ego_params.a_min, "a_max": s.ego_params.a_max,
                       "delta_max": s.ego_params.delta_max,
                       "vdelta_max": s.ego_params.vdelta_max,
                       "v_max": s.ego_params.v_max},
        },
        "goal": {
            "s_x_min": s.goal.s_x_min,
            "s_x_max": s.goal.s_x_max,
            "allowed_lanes": ("any" if s.goal.allowed_lanes is None
                              else sorted(s.goal.allowed_lanes)),
        },
        "challengers": [
            {
                "id": c.id,
                "length": c.length,
                "width": c.width,
                "points": [{"t": p.t, "s_x": p.s_x, "s_y": p.s_y,
                            "v": p.v, "psi": p.psi} for p in c.points],
            }
            for c in s.challengers
        ],
        "meta": s.meta,
    }


def save_json(scenario: Scenario) -> bytes:
    """Serialize deterministically; load_json(save_json(s)) == s."""
    return json.dumps(_to_dict(scenario), separators=(",", ":"),
                      allow_nan=False).encode("utf-8")


class _Reader:
    """Mapping reader that reports missing/ill-typed fields by path."""

    def __init__(self, obj, path=""):
        if not isinstance(obj, dict):
            raise ScenarioError(f"expected object, got {type(obj).__name__}", path)
        self.obj = obj
        self.path = path

    def _at(self, key):
        return f"{self.path}.{key}" if self.path else str(key)

    def child(self, key) -> "_Reader":
        return _Reader(self.get(key), self._at(key))

    def get(self, key):
        if key not in self.obj:
            raise ScenarioError("missing required field", self._at(key))
        return self.obj[key]

    def number(self, key) -> float:
        value = self.get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"expected number, got {value!r}", self._at(key))
        return float(value)

    def integer(self, key) -> int:
        value = self.get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"expected integer, got {value!r}", self._at(key))
        return value

    def string(self, key) -> str:
        value = self.get(key)
        if not isinstance(value, str):
            raise ScenarioError(f"expected string, got {value!r}", self._at(key))
        return value

    def array(self, key) -> list:
        value = self.get(key)
        if not isinstance(value, list):
            raise ScenarioError(f"expected array, got {value!r}", self._at(key))
        return value


def load_json(data: bytes | str) -> Scenario:
    """Parse and validate a native-format scenario document."""
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from None
    root = _Reader(obj)
    version = root.integer("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version}",
                            "schema_version")

    road_r = root.child("road")
    origin = road_r.array("origin")
    if len(origin) != 2 or not all(isinstance(v, (int, float)) for v in origin):
        raise ScenarioError("expected [x, y]", "road.origin")
    try:
        road = RoadNetwork(road_r.integer("lane_count"), road_r.number("lane_width"),
                           road_r.number("length"), float(origin[0]), float(origin[1]))
    except ValueError as exc:
        raise ScenarioError(str(exc), "road") from None

    ego_r = root.child("ego")
    start_r = ego_r.child("start")
    try:
        ego_start = VehicleState(start_r.number("s_x"), start_r.number("s_y"),
                                 start_r.number("v"), start_r.number("delta"),
                                 start_r.number("psi"))
    except ValueError as exc:
        raise ScenarioError(str(exc), "ego.start") from None
    params_r = ego_r.child("params")
    try:
        ego_params = VehicleParams(
            params_r.number("length"), params_r.number("width"),
            params_r.number("wheelbase"), params_r.number("a_min"),
            params_r.number("a_max"), params_r.number("delta_max"),
            params_r.number("vdelta_max"), params_r.number("v_max"))
    except ValueError as exc:
        raise ScenarioError(str(exc), "ego.params") from None

    goal_r = root.child("goal")
    lanes_raw = goal_r.get("allowed_lanes")
    if lanes_raw == "any":
        allowed = None
    elif isinstance(lanes_raw, list) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in lanes_raw):
        allowed = frozenset(lanes_raw)
    else:
        raise ScenarioError(f'expected "any" or integer array, got {lanes_raw!r}',
                            "goal.allowed_lanes")
    goal = GoalRegion(goal_r.number("s_x_min"), goal_r.number("s_x_max"), allowed)

    challengers = []
    for i, entry in enumerate(root.array("challengers")):
        c_r = _Reader(entry, f"challengers[{i}]")
        points = []
        for j, p in enumerate(c_r.array("points")):
            p_r = _Reader(p, f"challengers[{i}].points[{j}]")
            try:
                points.append(TrajectoryPoint(
                    p_r.number("t"), p_r.number("s_x"), p_r.number("s_y"),
                    p_r.number("v"), p_r.number("psi")))
            except ScenarioError as exc:
                raise ScenarioError(str(exc).split(": ", 1)[-1], p_r.path) from None
        try:
            challengers.append(ChallengerTrack(
                c_r.string("id"), c_r.number("length"), c_r.number("width"), points))
        except ScenarioError as exc:
            raise ScenarioError(str(exc).split(": ", 1)[-1], c_r.path) from None

    meta = root.get("meta")
    if not isinstance(meta, dict):
        raise ScenarioError("expected object", "meta")

    return Scenario(id=root.string("id"), kind=root.string("kind"), road=road,
                    dt=root.number("dt"), duration=root.number("duration"),
                    ego_start=ego_start, ego_lane=ego_r.integer("lane"),
                    ego_params=ego_params, goal=goal, challengers=challengers,
                    meta=meta)


def load_file(path) -> Scenario:
    with open(path, "rb") as fh:
        return load_json(fh.read())


def save_file(scenario: Scenario, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_json(scenario))


# ---------------------------------------------------------------------------
# Drivability


@dataclass(frozen=True)
class Violation:
    kind: str  # overlap | offroad | accel_bound | yaw_rate_bound
    t: float
    subjects: tuple[str, ...]
    detail: str


@dataclass(frozen=True)
class DrivabilityReport:
    feasible: bool
    violations: tuple[Violation, ...]


def check_drivability(scenario: Scenario) -> DrivabilityReport:
    """Verify challenger tracks: mutually collision-free, on-road, and
    within the kinematic feasibility envelope.

    Deterministic and independent of challenger list order: violations
    are reported in canonical (time, kind, subjects) order.
    """
    violations: list[Violation] = []
    tracks = scenario.challengers
    road = scenario.road
    a_lo, a_hi = CHALLENGER_ACCEL_BOUNDS
    n = scenario.n_substeps
    dt = scenario.dt

    for track in tracks:
        for k in range(len(track.points) - 1):
            p0, p1 = track.points[k], track.points[k + 1]
            accel = (p1.v - p0.v) / track.dt
            if accel < a_lo - 1e-9 or accel > a_hi + 1e-9:
                violations.append(Violation(
                    "accel_bound", p0.t, (track.id,),
                    f"accel {accel:.3f} outside [{a_lo}, {a_hi}]"))
            yaw_rate = _core.wrap_angle(p1.psi - p0.psi) / track.dt
            if abs(yaw_rate) > CHALLENGER_YAW_RATE_MAX + 1e-9:
                violations.append(Violation(
                    "yaw_rate_bound", p0.t, (track.id,),
                    f"yaw rate {yaw_rate:.3f} outside +/-{CHALLENGER_YAW_RATE_MAX}"))

    for k in range(n + 1):
        t = k * dt
        fps = [(track.id, track.footprint_at(t)) for track in tracks]
        for tid, fp in fps:
            if _core.rect_outside_box(fp.center_x, fp.center_y, fp.heading,
                                      fp.half_length, fp.half_width,
                                      road.x_min, road.x_max,
                                      road.y_min, road.y_max):
                violations.append(Violation(
                    "offroad", t, (tid,), f"challenger {tid} leaves the road"))
        for i in range(len(fps)):
            for j in range(i + 1, len(fps)):
                if _rects_overlap(fps[i][1], fps[j][1]):
                    pair = tuple(sorted((fps[i][0], fps[j][0])))
                    violations.append(Violation(
                        "overlap", t, pair,
                        f"challengers {pair[0]} and {pair[1]} overlap"))

    violations.sort(key=lambda v: (v.t, v.kind, v.subjects))
    return DrivabilityReport(feasible=not violations, violations=tuple(violations))
