"""Command-line entry point binding scenario generation, validation,
filtering, training, evaluation, trace replay, and the serve protocol.

Exit codes: 0 success, 1 usage error, 2 data error (malformed inputs),
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sad-sim",
                     description="Scenario-based highway driving workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate scenario datasets")
    p.add_argument("--kind", required=True,
                   help="comma list of A, B, cutout")
    p.add_argument("--count", type=int, required=True,
                   help="training scenarios per kind")
    p.add_argument("--test-count", type=int, default=0,
                   help="test scenarios per kind")
    p.add_argument("--easy", action="store_true",
                   help="generate maintain-solvable variants")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="drivability-check scenario files")
    p.add_argument("paths", nargs="+")

    p = sub.add_parser("filter", help="split scenarios by decision time")
    p.add_argument("paths", nargs="*", default=[])
    p.add_argument("--manifest", help="take scenarios from a manifest")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train or roll out a policy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--policy", default="a2c_discrete",
                   help="maintain | random | a2c_discrete | a2c_continuous")
    p.add_argument("--budget", type=int, required=True,
                   help="total simulation sub-steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="run-configuration INI file")
    p.add_argument("--resume", help="checkpoint to initialize parameters from")
    p.add_argument("--split", default="train", choices=("train", "test"))

    p = sub.add_parser("eval", help="evaluate policies on test manifests")
    p.add_argument("--test", action="append", required=True,
                   metavar="NAME=MANIFEST",
                   help="labelled test manifest (repeatable)")
    p.add_argument("--policy", action="append", default=[],
                   help="baseline tag: maintain or random (repeatable)")
    p.add_argument("--checkpoint", action="append", default=[],
                   help="trained checkpoint file (repeatable)")
    p.add_argument("--seeds", type=int, default=1,
                   help="episodes per scenario for stochastic policies")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="run-configuration INI file")
    p.add_argument("--shield", choices=("on", "off"), default=None,
                   help="override the shield setting")

    p = sub.add_parser("rollout", help="run one episode and dump its trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", default="maintain")
    p.add_argument("--checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trace JSON-lines path")
    p.add_argument("--config")
    p.add_argument("--shield", choices=("on", "off"), default=None)

    p = sub.add_parser("replay", help="render a trace as text/SVG frames")
    p.add_argument("trace")
    p.add_argument("--svg-dir", help="also write one SVG per sub-step")

    p = sub.add_parser("serve", help="expose environment sessions over the "
                                     "line protocol")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="train", choices=("train", "test"))
    p.add_argument("--stdio", action="store_true")
    p.add_argument("--port", type=int, help="TCP port (0 = ephemeral)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--mode", default="hierarchical",
                   choices=("hierarchical", "continuous"))
    p.add_argument("--config")
    p.add_argument("--shield", choices=("on", "off"), default=None)
    return parser


# ---------------------------------------------------------------------------
# Helpers


def _load_config(path) -> "runconfig.RunConfig":
    from . import runconfig
    if path is None:
        return runconfig.RunConfig()
    try:
        return runconfig.load_file(path)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except ValueError as exc:
        raise DataError(f"bad config {path}: {exc}")


def _load_scenario_file(path):
    from .commonroad_io import import_commonroad_xml
    from .scenario import ScenarioError, load_file
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file: {path}")
    try:
        if p.suffix.lower() == ".xml":
            return import_commonroad_xml(p.read_bytes())
        return load_file(p)
    except ScenarioError as exc:
        raise DataError(f"{path}: {exc}")


def _load_manifest_scenarios(manifest_path, split: str):
    from .generators import load_manifest
    try:
        manifest = load_manifest(manifest_path)
    except FileNotFoundError:
        raise DataError(f"manifest not found: {manifest_path}")
    except (ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"bad manifest {manifest_path}: {exc}")
    entries = manifest.get(split, [])
    if not entries:
        raise DataError(f"manifest {manifest_path} has no {split!r} entries")
    return [_load_scenario_file(e["path"]) for e in entries]


def _policy_env_config(config, tag: str, shield_flag):
    mode = "continuous" if tag == "a2c_continuous" else "hierarchical"
    shield_enabled = None if shield_flag is None else (shield_flag == "on")
    return config.with_mode(mode, shield_enabled).env


def _load_checkpoint(path):
    from .agents import MlpParams
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return MlpParams.from_checkpoint(doc)
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {path}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"bad checkpoint {path}: {exc}")


def _build_policy(config, tag=None, checkpoint=None, greedy=True):
    from .agents import ContinuousA2C, DiscreteA2C, MaintainPolicy, RandomPolicy
    from .env import OBS_DIM
    if checkpoint is not None:
        params = _load_checkpoint(checkpoint)
        cls = DiscreteA2C if params.mode == "discrete" else ContinuousA2C
        tag = "a2c_discrete" if params.mode == "discrete" else "a2c_continuous"
        cfg = replace(config.a2c, hidden=params.hidden)
        return tag, cls(params.obs_dim, cfg, config.env.scaling,
                        params=params, greedy=greedy)
    if tag == "maintain":
        return tag, MaintainPolicy()
    if tag == "random":
        return tag, RandomPolicy(config.a2c.seed)
    if tag in ("a2c_discrete", "a2c_continuous"):
        cls = DiscreteA2C if tag == "a2c_discrete" else ContinuousA2C
        return tag, cls(OBS_DIM, config.a2c, config.env.scaling, greedy=greedy)
    raise DataError(f"unknown policy {tag!r}")


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    from .generators import build_dataset
    kinds = [k.strip() for k in args.kind.split(",") if k.strip()]
    valid = {"A", "B", "cutout"}
    for kind in kinds:
        if kind not in valid:
            raise UsageError(f"--kind must be among {sorted(valid)}, "
                             f"got {kind!r}")
    if args.count < 0 or args.test_count < 0:
        raise UsageError("counts must be >= 0")
    token = (lambda k: f"easy_{k}") if args.easy else (lambda k: k)
    train_counts = {token(k): args.count for k in kinds}
    test_counts = {token(k): args.test_count for k in kinds}
    build_dataset(args.out, train_counts, test_counts, args.seed)
    manifest_path = Path(args.out) / "manifest.json"
    print(manifest_path)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .scenario import check_drivability
    any_malformed = False
    for path in args.paths:
        try:
            scenario = _load_scenario_file(path)
        except DataError as exc:
            print(f"{path}: error: {exc}")
            any_malformed = True
            continue
        report = check_drivability(scenario)
        if report.feasible:
            print(f"{path}: feasible")
        else:
            print(f"{path}: infeasible ({len(report.violations)} violations)")
            for v in report.violations[:10]:
                print(f"  t={v.t:.1f} {v.kind}: {v.detail}")
    return EXIT_DATA if any_malformed else EXIT_OK


def cmd_filter(args) -> int:
    from .generators import DECISION_TIME_MIN, decision_time
    paths = list(args.paths)
    if args.manifest:
        from .generators import load_manifest
        manifest = load_manifest(args.manifest)
        paths.extend(e["path"] for split in ("train", "test")
                     for e in manifest.get(split, []))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kept, rejected = [], []
    for path in paths:
        scenario = _load_scenario_file(path)
        t = decision_time(scenario)
        shown = "inf" if math.isinf(t) else f"{t:.1f}s"
        if t >= DECISION_TIME_MIN:
            kept.append(str(path))
            print(f"{path}: kept (decision time {shown})")
        else:
            rejected.append(str(path))
            print(f"{path}: rejected (decision time {shown})")
    for name, bucket in (("kept", kept), ("rejected", rejected)):
        (out / f"{name}.json").write_text(
            json.dumps({"scenarios": bucket}, indent=2) + "\n",
            encoding="utf-8")
    print(f"kept {len(kept)}, rejected {len(rejected)}")
    return EXIT_OK


def cmd_train(args) -> int:
    from . import runconfig
    from .agents import PolicySpec, train
    from .env import HighwayEnv

    config = _load_config(args.config)
    if args.budget < 0:
        raise UsageError("--budget must be >= 0")
    if args.policy not in PolicySpec.TAGS:
        raise DataError(f"unknown policy {args.policy!r}")
    scenarios = _load_manifest_scenarios(args.manifest, args.split)
    env_config = _policy_env_config(config, args.policy, None)

    init_params = _load_checkpoint(args.resume) if args.resume else None
    spec = PolicySpec(tag=args.policy, a2c=config.a2c,
                      scaling=config.env.scaling)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def factory():
        return HighwayEnv(None, env_config)

    def checkpoint_cb(episode, params):
        if params is not None:
            _write_checkpoint(out / f"checkpoint_ep{episode:06d}.json", params)

    result = train(factory, scenarios, spec, args.budget, args.seed,
                   log_wall_time=config.train.log_wall_time,
                   checkpoint_cb=checkpoint_cb,
                   checkpoint_every=config.train.checkpoint_every,
                   init_params=init_params)

    log_path = out / "log.csv"
    append = args.resume is not None and log_path.exists()
    with open(log_path, "a" if append else "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not append:
            writer.writerow(["episode", "scenario", "kind", "reason",
                             "return", "length", "wall_time"])
        for ep in result.episodes:
            writer.writerow([ep.index, ep.scenario_id, ep.kind, ep.reason,
                             f"{ep.ret:.6f}", ep.length,
                             f"{ep.wall_time:.3f}"])
    if result.params is not None:
        _write_checkpoint(out / "checkpoint.json", result.params)
    runconfig.save_file(config, out / "config.ini")
    print(f"episodes={len(result.episodes)} substeps={result.substeps} "
          f"updates={result.updates}")
    print(out / "checkpoint.json" if result.params is not None else log_path)
    return EXIT_OK


def _write_checkpoint(path, params) -> None:
    doc = params.to_checkpoint()
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def cmd_eval(args) -> int:
    from .evaluation import emit_report, goal_matrix, render_goal_csv

    config = _load_config(args.config)
    test_sets = {}
    for item in args.test:
        if "=" not in item:
            raise UsageError(f"--test expects NAME=MANIFEST, got {item!r}")
        name, manifest_path = item.split("=", 1)
        test_sets[name] = _load_manifest_scenarios(manifest_path, args.split)

    policies = {}
    modes = set()
    for tag in args.policy:
        name, policy = _build_policy(config, tag=tag)
        policies[name] = policy
        modes.add(policy.mode)
    for ckpt in args.checkpoint:
        _, policy = _build_policy(config, checkpoint=ckpt)
        policies[Path(ckpt).stem] = policy
        modes.add(policy.mode)
    if not policies:
        raise UsageError("need at least one --policy or --checkpoint")
    if len(modes) > 1:
        raise DataError("cannot mix hierarchical and continuous policies "
                        "in one evaluation")
    mode = modes.pop()
    env_config = _policy_env_config(
        config, "a2c_continuous" if mode == "continuous" else "maintain",
        args.shield)

    report = goal_matrix(policies, test_sets, env_config,
                         seeds=tuple(range(max(1, args.seeds))))
    emit_report(report, args.out)
    sys.stdout.write(render_goal_csv(report))
    return EXIT_OK


def cmd_rollout(args) -> int:
    from .env import HighwayEnv, TraceRecorder
    from .evaluation import run_episode

    config = _load_config(args.config)
    scenario = _load_scenario_file(args.scenario)
    tag = args.policy if args.checkpoint is None else None
    name, policy = _build_policy(config, tag=tag, checkpoint=args.checkpoint)
    env_config = _policy_env_config(config, name, args.shield)
    trace = TraceRecorder()
    env = HighwayEnv(scenario, env_config, trace=trace)
    reason, t_end, ret, _ = run_episode(scenario, policy, env_config,
                                        seed=args.seed, env=env)
    trace.write_jsonl(args.out)
    print(f"{reason.value} t={t_end:.1f} return={ret:+.1f} "
          f"substeps={len(trace)}")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.trace)
    if not path.exists():
        raise DataError(f"no such trace: {args.trace}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{args.trace}:{i + 1}: invalid JSON: {exc}")
    svg_dir = None
    if args.svg_dir:
        svg_dir = Path(args.svg_dir)
        svg_dir.mkdir(parents=True, exist_ok=True)
    for i, rec in enumerate(records):
        print(_text_frame(i, rec))
        if svg_dir is not None:
            (svg_dir / f"frame_{i:05d}.svg").write_text(_svg_frame(rec),
                                                        encoding="utf-8")
    return EXIT_OK


def _text_frame(index: int, rec: dict) -> str:
    ego = rec["ego"]
    lines = [f"frame {index} t={rec['t']:.1f} reason={rec['reason'] or '-'}"]
    lines.append(f"  ego s_x={ego['s_x']:.2f} s_y={ego['s_y']:.2f} "
                 f"v={ego['v']:.2f} psi={ego['psi']:.3f}")
    for ch in rec["challengers"]:
        lines.append(f"  {ch['id']} s_x={ch['s_x']:.2f} s_y={ch['s_y']:.2f} "
                     f"v={ch['v']:.2f}")
    span = 120.0
    x0 = ego["s_x"] - span / 4.0
    cols = 60
    rows = {}
    for label, obj in [("E", ego)] + [(ch["id"][-1], ch)
                                      for ch in rec["challengers"]]:
        col = int((obj["s_x"] - x0) / span * cols)
        row = int(obj["s_y"] / 3.5)
        if 0 <= col < cols:
            rows.setdefault(row, {})[col] = label
    for row in sorted(rows, reverse=True):
        cells = ["."] * cols
        for col, label in rows[row].items():
            cells[col] = label
        lines.append(f"  lane{row} |{''.join(cells)}|")
    return "\n".join(lines)


def _svg_frame(rec: dict) -> str:
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1000 40">',
             '<rect x="0" y="0" width="1000" height="40" fill="#ddd"/>']
    for obj, color in [(rec["ego"], "#36c")] + [
            (ch, "#c33") for ch in rec["challengers"]]:
        x = obj["s_x"] - 2.25
        y = 40.0 - (obj["s_y"] + 0.9) * (40.0 / 10.5) if obj["s_y"] < 10.5 else 0
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="4.5" '
                     f'height="6.9" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_serve(args) -> int:
    from . import serve as serve_mod

    config = _load_config(args.config)
    config = config.with_mode(
        args.mode, None if args.shield is None else args.shield == "on")
    scenarios = _load_manifest_scenarios(args.manifest, args.split)
    by_id = {s.id: s for s in scenarios}
    if args.stdio:
        serve_mod.serve_stdio(by_id, config)
        return EXIT_OK
    if args.port is None:
        raise UsageError("serve needs --stdio or --port")
    serve_mod.serve_tcp(args.host, args.port, by_id, config,
                        announce=lambda msg: print(msg, flush=True))
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "validate": cmd_validate,
    "filter": cmd_filter,
    "train": cmd_train,
    "eval": cmd_eval,
    "rollout": cmd_rollout,
    "replay": cmd_replay,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failures surface with a message
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
