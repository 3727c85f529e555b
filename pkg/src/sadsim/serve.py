"""Newline-delimited JSON protocol exposing environment sessions to
external clients (one episode loop per session, synchronous, one request
in flight).

On session open the server sends a handshake line advertising the mode,
observation dimension, action space, and available scenario ids. Requests
are {"cmd": "reset"|"step"|"close", ...}; see README for byte-level
examples. Malformed requests produce an error reply and the session
continues.
"""

from __future__ import annotations

import json
import socketserver
import sys
from typing import Mapping, Optional

from .agents import PolicySpec  # noqa: F401  (documented protocol consumer)
from .env import OBS_DIM, HighwayEnv, EpisodeOver
from .pilot import N_LAT_OPTIONS, N_LON_OPTIONS, HighLevelAction
from .road import DEFAULT_PARAMS
from .runconfig import RunConfig
from .scenario import Scenario

PROTOCOL_VERSION = 1


def _reply(payload: dict) -> str:
    return json.dumps(payload, separators=(",", ":")) + "\n"


def _error(code: str, message: str) -> dict:
    return {"ok": False, "error": code, "message": message}


class Session:
    """One environment session; not thread-safe (one per connection)."""

    def __init__(self, scenarios: Mapping[str, Scenario], config: RunConfig):
        self.scenarios = scenarios
        self.config = config
        self.env = HighwayEnv(None, config.env)
        self._has_episode = False

    def handshake(self) -> dict:
        if self.config.env.mode == "hierarchical":
            action = {"kind": "options", "lateral": N_LAT_OPTIONS,
                      "longitudinal": N_LON_OPTIONS}
        else:
            action = {"kind": "box",
                      "low": [DEFAULT_PARAMS.a_min, -DEFAULT_PARAMS.vdelta_max],
                      "high": [DEFAULT_PARAMS.a_max, DEFAULT_PARAMS.vdelta_max]}
        return {"ok": True, "type": "hello", "protocol": PROTOCOL_VERSION,
                "mode": self.config.env.mode, "obs_dim": OBS_DIM,
                "action_space": action,
                "scenarios": sorted(self.scenarios)}

    def handle_line(self, line: str) -> Optional[dict]:
        """Returns the reply document, or None for a close request."""
        line = line.strip()
        if not line:
            return _error("bad_request", "empty request")
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error("bad_request", f"invalid JSON: {exc}")
        if not isinstance(req, dict) or "cmd" not in req:
            return _error("bad_request", 'request must be {"cmd": ...}')
        cmd = req["cmd"]
        if cmd == "reset":
            return self._do_reset(req)
        if cmd == "step":
            return self._do_step(req)
        if cmd == "close":
            return None
        return _error("bad_request", f"unknown cmd {cmd!r}")

    def _do_reset(self, req: dict) -> dict:
        sid = req.get("scenario")
        if sid is None and len(self.scenarios) == 1:
            sid = next(iter(self.scenarios))
        if sid not in self.scenarios:
            return _error("unknown_scenario", f"no scenario {sid!r}")
        seed = req.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            return _error("bad_request", "seed must be an integer")
        obs = self.env.reset(seed=seed, scenario=self.scenarios[sid])
        self._has_episode = True
        vec = obs.to_vector(self.config.env.scaling)
        return {"ok": True, "obs": list(vec)}

    def _do_step(self, req: dict) -> dict:
        if not self._has_episode:
            return _error("no_episode", "reset before stepping")
        action = req.get("action")
        if not isinstance(action, list) or len(action) != 2:
            return _error("bad_action", "action must be a 2-element array")
        try:
            if self.config.env.mode == "hierarchical":
                lat, lon = action
                if (isinstance(lat, bool) or isinstance(lon, bool)
                        or not isinstance(lat, int) or not isinstance(lon, int)):
                    return _error("bad_action",
                                  "hierarchical action is [lateral, longitudinal] "
                                  "integer indices")
                if not (0 <= lat < N_LAT_OPTIONS and 0 <= lon < N_LON_OPTIONS):
                    return _error("bad_action", f"action indices out of range: "
                                                f"{action}")
                outcome = self.env.step(HighLevelAction.from_indices(lat, lon))
            else:
                accel, steer = action
                if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in (accel, steer)):
                    return _error("bad_action",
                                  "continuous action is [accel, steer_rate] floats")
                outcome = self.env.step_continuous(float(accel), float(steer))
        except EpisodeOver as exc:
            return _error("episode_over", str(exc))
        except ValueError as exc:
            return _error("bad_action", str(exc))
        vec = outcome.obs.to_vector(self.config.env.scaling)
        return {
            "ok": True,
            "obs": list(vec),
            "reward": outcome.reward,
            "terminated": outcome.terminated,
            "reason": outcome.reason.value if outcome.reason else None,
            "info": {"t": outcome.info["t"],
                     "shield_overridden": outcome.info["shield_overridden"]},
        }


def serve_stdio(scenarios: Mapping[str, Scenario], config: RunConfig,
                stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = Session(scenarios, config)
    stdout.write(_reply(session.handshake()))
    stdout.flush()
    for line in stdin:
        reply = session.handle_line(line)
        if reply is None:
            stdout.write(_reply({"ok": True, "type": "bye"}))
            stdout.flush()
            break
        stdout.write(_reply(reply))
        stdout.flush()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(self.server.scenarios, self.server.run_config)
        self.wfile.write(_reply(session.handshake()).encode("utf-8"))
        for raw in self.rfile:
            reply = session.handle_line(raw.decode("utf-8"))
            if reply is None:
                self.wfile.write(_reply({"ok": True, "type": "bye"})
                                 .encode("utf-8"))
                break
            self.wfile.write(_reply(reply).encode("utf-8"))


class EnvServer(socketserver.ThreadingTCPServer):
    """One isolated session per connection; no shared mutable state."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, scenarios: Mapping[str, Scenario],
                 config: RunConfig):
        super().__init__(address, _Handler)
        self.scenarios = scenarios
        self.run_config = config


def serve_tcp(host: str, port: int, scenarios: Mapping[str, Scenario],
              config: RunConfig, announce=None) -> None:
    with EnvServer((host, port), scenarios, config) as server:
        actual = server.server_address
        if announce is not None:
            announce(f"listening on {actual[0]}:{actual[1]}")
        server.serve_forever()
