"""Metrics engine: termination-reason distributions, moving averages,
goal-reaching matrices, and deterministic report emission.

Also hosts the episode runner shared by evaluation, scenario generation,
and the CLI.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .env import EnvConfig, HighwayEnv, Reason
from .scenario import Scenario

REASON_ORDER = tuple(Reason)


@dataclass(frozen=True)
class EpisodeRecord:
    scenario_id: str
    kind: str
    policy: str
    seed: int
    reason: Reason
    ret: float
    length: int


@dataclass
class EvalReport:
    """Goal rates per (policy, test set), episode counts, per-cell
    termination distributions, and per-cell moving-average series."""

    set_names: list[str]
    goal: dict[tuple[str, str], float] = field(default_factory=dict)
    episodes: dict[tuple[str, str], int] = field(default_factory=dict)
    distributions: dict[tuple[str, str], dict[Reason, float]] = field(
        default_factory=dict)
    moving_averages: dict[tuple[str, str, Reason], list[float]] = field(
        default_factory=dict)
    policies: list[str] = field(default_factory=list)


def termination_distribution(records: Sequence) -> dict[Reason, float]:
    """Percentage of episodes per termination reason; reasons absent from
    the records report 0. Accepts records or bare reasons."""
    if not records:
        raise ValueError("termination_distribution needs at least one episode")
    reasons = [r.reason if isinstance(r, EpisodeRecord) else r for r in records]
    m = len(reasons)
    return {reason: 100.0 * sum(1 for r in reasons if r is reason) / m
            for reason in REASON_ORDER}


def moving_average(series: Sequence[float], window: int) -> list[float]:
    """Trailing mean over the last min(k+1, window) values; length
    preserved."""
    if window < 1:
        raise ValueError("window must be >= 1")
    out = []
    for k in range(len(series)):
        lo = max(0, k - window + 1)
        chunk = series[lo:k + 1]
        out.append(sum(chunk) / len(chunk))
    return out


def run_episode(scenario: Scenario, policy, config: EnvConfig,
                seed: int = 0, env: Optional[HighwayEnv] = None,
                max_ticks: int = 100000):
    """Roll one full episode; returns (reason, end time, final info)."""
    if env is None:
        env = HighwayEnv(scenario, config)
    obs = env.reset(seed=seed, scenario=scenario)
    policy.begin_episode(seed)
    ret = 0.0
    for _ in range(max_ticks):
        if config.mode == "hierarchical":
            outcome = env.step(policy.act(obs))
        else:
            accel, steer = policy.act(obs)
            outcome = env.step_continuous(accel, steer)
        obs = outcome.obs
        ret += outcome.reward
        if outcome.terminated:
            return outcome.reason, outcome.info["t"], ret, outcome.info
    raise RuntimeError("episode did not terminate within max_ticks")


def evaluate_cell(policy_name: str, policy, scenarios: Sequence[Scenario],
                  config: EnvConfig, seeds: Sequence[int] = (0,),
                  env: Optional[HighwayEnv] = None) -> list[EpisodeRecord]:
    """One policy on one test set: each scenario once (deterministic
    policy) or once per seed (stochastic)."""
    if getattr(policy, "deterministic", False):
        seeds = (seeds[0],)
    records = []
    if env is None:
        env = HighwayEnv(None, config)
    for scenario in scenarios:
        for seed in seeds:
            reason, t_end, ret, _ = run_episode(scenario, policy, config,
                                                seed=seed, env=env)
            records.append(EpisodeRecord(
                scenario_id=scenario.id, kind=scenario.kind,
                policy=policy_name, seed=seed, reason=reason, ret=ret,
                length=int(round(t_end / scenario.dt))))
    return records


def goal_matrix(policies: Mapping[str, object],
                test_sets: Mapping[str, Sequence[Scenario]],
                config: EnvConfig, seeds: Sequence[int] = (0,),
                ma_window: int = 100) -> EvalReport:
    """Goal-reaching rate G(policy, set) in percent over every cell."""
    for name, scenarios in test_sets.items():
        if not scenarios:
            raise ValueError(f"test set {name!r} is empty")
    report = EvalReport(set_names=list(test_sets), policies=list(policies))
    for pname, policy in policies.items():
        for sname, scenarios in test_sets.items():
            records = evaluate_cell(pname, policy, scenarios, config, seeds)
            goals = sum(1 for r in records if r.reason is Reason.GOAL_REACHED)
            report.goal[(pname, sname)] = 100.0 * goals / len(records)
            report.episodes[(pname, sname)] = len(records)
            report.distributions[(pname, sname)] = termination_distribution(records)
            for reason in REASON_ORDER:
                flags = [1.0 if r.reason is reason else 0.0 for r in records]
                report.moving_averages[(pname, sname, reason)] = moving_average(
                    flags, ma_window)
    return report


# ---------------------------------------------------------------------------
# Report emission


def _fmt(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".")


def render_goal_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["policy"] + report.set_names)
    for pname in report.policies:
        writer.writerow([pname] + [_fmt(report.goal[(pname, s)])
                                   for s in report.set_names])
    return buf.getvalue()


def parse_goal_csv(text: str) -> dict[tuple[str, str], float]:
    rows = list(csv.reader(io.StringIO(text)))
    sets = rows[0][1:]
    return {(row[0], s): float(v)
            for row in rows[1:] for s, v in zip(sets, row[1:])}


def render_distribution_csv(dist: dict[Reason, float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["reason", "percent"])
    for reason in REASON_ORDER:
        writer.writerow([reason.value, _fmt(dist.get(reason, 0.0))])
    return buf.getvalue()


def emit_report(report: EvalReport, out_dir) -> list[Path]:
    """Write CSV tables and two-column plot data; byte-deterministic for
    identical reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "goal_matrix.csv"
    path.write_text(render_goal_csv(report), encoding="utf-8")
    written.append(path)

    for pname in report.policies:
        for sname in report.set_names:
            dist = report.distributions[(pname, sname)]
            path = out / f"termination_{pname}_{sname}.csv"
            path.write_text(render_distribution_csv(dist), encoding="utf-8")
            written.append(path)
            for reason in REASON_ORDER:
                series = report.moving_averages[(pname, sname, reason)]
                path = out / f"ma_{pname}_{sname}_{reason.value}.txt"
                lines = [f"{i} {_fmt(v)}" for i, v in enumerate(series)]
                path.write_text("\n".join(lines) + ("\n" if lines else ""),
                                encoding="utf-8")
                written.append(path)
    return written
