"""Read-only importer for a CommonRoad-style XML subset: parallel
straight lanelets, dynamic obstacles with state lists, and one planning
problem (initial state plus a rectangular goal position).

Anything outside the subset raises UnsupportedFeatureError explicitly;
the importer never truncates silently. Obstacle state lists are resampled
onto the simulation grid by linear interpolation of position and
velocity (nearest sample for heading).
"""

from __future__ import annotations

import math
from xml.etree import ElementTree

import numpy as np

from .road import DEFAULT_PARAMS, RoadNetwork, VehicleState
from .scenario import (ChallengerTrack, GoalRegion, Scenario, ScenarioError,
                       TrajectoryPoint)

_STRAIGHT_TOL = 1e-3
_WIDTH_TOL = 1e-2


class UnsupportedFeatureError(ScenarioError):
    """The document uses geometry or elements outside the importer's
    straight-highway subset."""


def _text_float(node, path: str) -> float:
    try:
        return float(node.text)
    except (TypeError, ValueError):
        raise ScenarioError("expected a number", path) from None


def _exact(parent, tag: str, path: str) -> float:
    node = parent.find(tag)
    if node is None:
        raise ScenarioError(f"missing <{tag}>", path)
    exact = node.find("exact")
    if exact is None:
        raise UnsupportedFeatureError(
            f"only exact <{tag}> values are supported", path)
    return _text_float(exact, f"{path}/{tag}/exact")


def _point(node, path: str) -> tuple[float, float]:
    x = node.find("x")
    y = node.find("y")
    if x is None or y is None:
        raise ScenarioError("point needs <x> and <y>", path)
    return _text_float(x, f"{path}/x"), _text_float(y, f"{path}/y")


def _bound_y(lanelet, tag: str, lanelet_id: str) -> float:
    """Constant y of a straight horizontal boundary polyline."""
    bound = lanelet.find(tag)
    path = f"lanelet[{lanelet_id}]/{tag}"
    if bound is None:
        raise ScenarioError(f"missing <{tag}>", path)
    points = [_point(p, f"{path}/point") for p in bound.findall("point")]
    if len(points) < 2:
        raise ScenarioError("boundary needs at least 2 points", path)
    ys = [p[1] for p in points]
    if max(ys) - min(ys) > _STRAIGHT_TOL:
        raise UnsupportedFeatureError(
            f"curved lanelet boundary (y varies by {max(ys) - min(ys):.3f} m)",
            path)
    return sum(ys) / len(ys), min(p[0] for p in points), max(p[0] for p in points)


def _road_from_lanelets(root) -> RoadNetwork:
    lanelets = root.findall("lanelet")
    if len(lanelets) < 2:
        raise UnsupportedFeatureError(
            f"need at least 2 lanelets, found {len(lanelets)}", "lanelet")
    spans = []
    x_lo = math.inf
    x_hi = -math.inf
    for ll in lanelets:
        lid = ll.get("id", "?")
        left_y, lx0, lx1 = _bound_y(ll, "leftBound", lid)
        right_y, rx0, rx1 = _bound_y(ll, "rightBound", lid)
        lo, hi = sorted((left_y, right_y))
        if hi - lo <= _STRAIGHT_TOL:
            raise ScenarioError("degenerate lanelet width", f"lanelet[{lid}]")
        spans.append((lo, hi))
        x_lo = min(x_lo, lx0, rx0)
        x_hi = max(x_hi, lx1, rx1)
    spans.sort()
    widths = [hi - lo for lo, hi in spans]
    if max(widths) - min(widths) > _WIDTH_TOL:
        raise UnsupportedFeatureError(
            f"lanelet widths differ ({min(widths):.3f}..{max(widths):.3f} m)",
            "lanelet")
    for (_, hi), (lo, _) in zip(spans, spans[1:]):
        if abs(lo - hi) > _WIDTH_TOL:
            raise UnsupportedFeatureError(
                "lanelets do not form an adjacent parallel stack", "lanelet")
    return RoadNetwork(lane_count=len(spans),
                       lane_width=sum(widths) / len(widths),
                       length=x_hi - x_lo,
                       origin_x=x_lo, origin_y=spans[0][0])


def _obstacle_samples(node, step_size: float, path: str):
    """Time-ordered (t, x, y, psi, v) samples from initialState plus the
    trajectory state list."""
    samples = []
    init = node.find("initialState")
    if init is None:
        raise ScenarioError("missing <initialState>", path)
    for state_node, sub in [(init, f"{path}/initialState")] + [
            (s, f"{path}/trajectory/state")
            for s in node.findall("trajectory/state")]:
        pos = state_node.find("position/point")
        if pos is None:
            raise UnsupportedFeatureError(
                "only point positions are supported", sub)
        x, y = _point(pos, f"{sub}/position/point")
        psi = _exact(state_node, "orientation", sub)
        v = _exact(state_node, "velocity", sub)
        step = _exact(state_node, "time", sub)
        samples.append((step * step_size, x, y, psi, v))
    samples.sort(key=lambda s: s[0])
    if samples[0][0] > 1e-9:
        raise UnsupportedFeatureError(
            f"obstacle appears at t={samples[0][0]:.3f}, not scenario start",
            path)
    for a, b in zip(samples, samples[1:]):
        if b[0] - a[0] <= 0:
            raise ScenarioError("duplicate obstacle state times", path)
    return samples


def _resample_track(oid: str, dims: tuple[float, float], samples,
                    dt: float, duration: float) -> ChallengerTrack:
    ts = np.array([s[0] for s in samples])
    xs = np.array([s[1] for s in samples])
    ys = np.array([s[2] for s in samples])
    psis = np.array([s[3] for s in samples])
    vs = np.array([s[4] for s in samples])
    n = int(round(duration / dt))
    grid = np.arange(n + 1) * dt
    gx = np.interp(grid, ts, xs)
    gy = np.interp(grid, ts, ys)
    gv = np.interp(grid, ts, vs)
    nearest = np.clip(np.searchsorted(ts, grid - 1e-12), 0, len(ts) - 1)
    # pick whichever neighbor sample is closer in time
    prev = np.clip(nearest - 1, 0, len(ts) - 1)
    use_prev = np.abs(grid - ts[prev]) < np.abs(ts[nearest] - grid)
    gpsi = psis[np.where(use_prev, prev, nearest)]
    points = [TrajectoryPoint(float(grid[k]), float(gx[k]), float(gy[k]),
                              float(gv[k]), float(gpsi[k]))
              for k in range(n + 1)]
    return ChallengerTrack(oid, dims[0], dims[1], points)


def _rectangle_dims(node, path: str) -> tuple[float, float]:
    rect = node.find("shape/rectangle")
    if rect is None:
        raise UnsupportedFeatureError("only rectangle shapes are supported",
                                      path)
    length = rect.find("length")
    width = rect.find("width")
    if length is None or width is None:
        raise ScenarioError("rectangle needs <length> and <width>", path)
    return (_text_float(length, f"{path}/length"),
            _text_float(width, f"{path}/width"))


def import_commonroad_xml(data: bytes | str, dt: float = 0.1) -> Scenario:
    """Build a Scenario from a straight-highway CommonRoad document.

    The scenario duration is the longest grid-aligned span covered by all
    obstacle tracks.
    """
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        raise ScenarioError(f"invalid XML: {exc}") from None
    if root.tag != "commonRoad":
        raise ScenarioError(f"expected <commonRoad> root, got <{root.tag}>")
    step_raw = root.get("timeStepSize")
    if step_raw is None:
        raise ScenarioError("missing timeStepSize attribute", "commonRoad")
    step_size = float(step_raw)
    if step_size <= 0:
        raise ScenarioError("timeStepSize must be > 0", "commonRoad")

    if root.find("staticObstacle") is not None:
        raise UnsupportedFeatureError("static obstacles are not supported",
                                      "staticObstacle")
    for obstacle in root.findall("obstacle"):
        # pre-2020 combined element
        role = obstacle.findtext("role", "")
        if role.strip() != "dynamic":
            raise UnsupportedFeatureError(
                "only dynamic obstacles are supported", "obstacle")

    road = _road_from_lanelets(root)

    obstacle_nodes = [(node.get("id", f"obs{i}"), node)
                      for i, node in enumerate(root.findall("dynamicObstacle"))]
    all_samples = []
    for oid, node in obstacle_nodes:
        path = f"dynamicObstacle[{oid}]"
        dims = _rectangle_dims(node, path)
        samples = _obstacle_samples(node, step_size, path)
        all_samples.append((oid, dims, samples))

    problems = root.findall("planningProblem")
    if len(problems) != 1:
        raise UnsupportedFeatureError(
            f"exactly one planning problem is supported, found {len(problems)}",
            "planningProblem")
    problem = problems[0]
    init = problem.find("initialState")
    if init is None:
        raise ScenarioError("missing <initialState>", "planningProblem")
    pos = init.find("position/point")
    if pos is None:
        raise UnsupportedFeatureError("only point initial positions are "
                                      "supported", "planningProblem/initialState")
    ego_x, ego_y = _point(pos, "planningProblem/initialState/position/point")
    ego_psi = _exact(init, "orientation", "planningProblem/initialState")
    ego_v = _exact(init, "velocity", "planningProblem/initialState")

    goal = problem.find("goalState")
    if goal is None:
        raise ScenarioError("missing <goalState>", "planningProblem")
    goal_pos = goal.find("position")
    if goal_pos is None:
        raise ScenarioError("goal needs <position>", "planningProblem/goalState")
    if goal_pos.find("lanelet") is not None:
        raise UnsupportedFeatureError(
            "lanelet-referenced goals are not supported",
            "planningProblem/goalState/position")
    rect = goal_pos.find("rectangle")
    if rect is None:
        raise UnsupportedFeatureError(
            "only rectangle goal positions are supported",
            "planningProblem/goalState/position")
    gpath = "planningProblem/goalState/position/rectangle"
    g_len = _text_float(rect.find("length"), f"{gpath}/length")
    g_wid = _text_float(rect.find("width"), f"{gpath}/width")
    center = rect.find("center")
    if center is None:
        raise ScenarioError("goal rectangle needs <center>", gpath)
    g_cx, g_cy = _point(center, f"{gpath}/center")
    orientation = rect.find("orientation")
    if orientation is not None and abs(_text_float(
            orientation, f"{gpath}/orientation")) > 1e-6:
        raise UnsupportedFeatureError("rotated goal rectangles are not "
                                      "supported", gpath)
    lanes = frozenset(
        lane for lane in range(road.lane_count)
        if abs(road.centerline_y(lane) - g_cy) <= g_wid / 2.0)
    if not lanes:
        raise UnsupportedFeatureError("goal rectangle covers no lane "
                                      "centerline", gpath)
    allowed = None if len(lanes) == road.lane_count else lanes
    goal_region = GoalRegion(g_cx - g_len / 2.0, g_cx + g_len / 2.0, allowed)

    if all_samples:
        duration = min(s[-1][0] for _, _, s in all_samples)
    else:
        time_node = goal.find("time")
        if time_node is None or time_node.find("intervalEnd") is None:
            raise ScenarioError(
                "cannot infer duration: no obstacles and no goal time interval",
                "planningProblem/goalState")
        duration = _text_float(time_node.find("intervalEnd"),
                               "planningProblem/goalState/time") * step_size
    duration = math.floor(duration / dt + 1e-9) * dt
    if duration < dt:
        raise ScenarioError(f"usable duration too short ({duration:.3f} s)")

    challengers = [_resample_track(oid, dims, samples, dt, duration)
                   for oid, dims, samples in all_samples]

    ego_lane = road.lane_of(ego_y)
    if ego_lane is None:
        raise ScenarioError("ego initial position is off the carriageway",
                            "planningProblem/initialState")

    return Scenario(
        id=root.get("benchmarkID", "imported"),
        kind="RealRoad", road=road, dt=dt, duration=duration,
        ego_start=VehicleState(ego_x, ego_y, ego_v, 0.0, ego_psi),
        ego_lane=ego_lane, ego_params=DEFAULT_PARAMS, goal=goal_region,
        challengers=challengers,
        meta={"source": "commonroad_xml", "timeStepSize": step_size},
    )
