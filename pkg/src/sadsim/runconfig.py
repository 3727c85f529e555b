"""Single INI-style run configuration snapshotting every tunable default
(environment, rewards, pilot, shield, observation scaling, learner, and
training options). See README for the schema."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

from .agents import A2cConfig
from .env import EnvConfig, ObservationScaling, Reason
from .pilot import Longitudinal, PilotConfig
from .shield import ShieldConfig


@dataclass(frozen=True)
class TrainOptions:
    log_wall_time: bool = False
    checkpoint_every: int = 0  # episodes; 0 disables periodic checkpoints


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = EnvConfig()
    a2c: A2cConfig = A2cConfig()
    train: TrainOptions = TrainOptions()

    def with_mode(self, mode: str, shield_enabled: bool | None = None) -> "RunConfig":
        kwargs = {"mode": mode}
        if shield_enabled is not None:
            kwargs["shield_enabled"] = shield_enabled
        return replace(self, env=replace(self.env, **kwargs))


_REWARD_KEYS = {
    "goal_reached": Reason.GOAL_REACHED,
    "collision": Reason.COLLISION,
    "offroad": Reason.OFFROAD,
    "timeout": Reason.TIMEOUT,
    "standstill": Reason.STANDSTILL,
}

_ACCEL_KEYS = {
    "accel_accelerate": Longitudinal.ACCELERATE,
    "accel_maintain": Longitudinal.MAINTAIN,
    "accel_brake": Longitudinal.BRAKE,
    "accel_hard_brake": Longitudinal.HARD_BRAKE,
}


def to_ini(config: RunConfig) -> str:
    cp = configparser.ConfigParser()
    env = config.env
    cp["env"] = {
        "mode": env.mode,
        "shield_enabled": str(env.shield_enabled).lower(),
        "tick_duration": repr(env.tick_duration),
        "standstill_speed": repr(env.standstill_speed),
        "standstill_hold": repr(env.standstill_hold),
        "neighbor_sentinel": repr(env.neighbor_sentinel),
    }
    cp["rewards"] = {key: repr(env.rewards[reason])
                     for key, reason in _REWARD_KEYS.items()}
    pilot = env.pilot
    cp["pilot"] = {
        "t_lc": repr(pilot.t_lc),
        "k_y": repr(pilot.k_y),
        "k_psi": repr(pilot.k_psi),
        "k_d": repr(pilot.k_d),
        **{key: repr(pilot.accel_table[lon])
           for key, lon in _ACCEL_KEYS.items()},
    }
    cp["shield"] = {"horizon": repr(env.shield.horizon)}
    scaling = env.scaling
    cp["scaling"] = {name: repr(getattr(scaling, name))
                     for name in ("v_max", "lane_max", "lateral_max",
                                  "dist_max", "rel_x_max", "rel_v_max")}
    a2c = config.a2c
    cp["a2c"] = {
        "gamma": repr(a2c.gamma),
        "n_steps": str(a2c.n_steps),
        "lr": repr(a2c.lr),
        "entropy_coef": repr(a2c.entropy_coef),
        "value_coef": repr(a2c.value_coef),
        "grad_clip": repr(a2c.grad_clip),
        "rmsprop_alpha": repr(a2c.rmsprop_alpha),
        "rmsprop_eps": repr(a2c.rmsprop_eps),
        "hidden1": str(a2c.hidden[0]),
        "hidden2": str(a2c.hidden[1]),
        "seed": str(a2c.seed),
    }
    cp["train"] = {
        "log_wall_time": str(config.train.log_wall_time).lower(),
        "checkpoint_every": str(config.train.checkpoint_every),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> RunConfig:
    """Parse a run configuration; unknown sections or keys are errors."""
    cp = configparser.ConfigParser()
    cp.read_string(text)
    base = RunConfig()

    def section(name: str) -> dict:
        return dict(cp[name]) if cp.has_section(name) else {}

    def pop_float(values: dict, key: str, default: float) -> float:
        return float(values.pop(key)) if key in values else default

    def pop_int(values: dict, key: str, default: int) -> int:
        return int(values.pop(key)) if key in values else default

    def pop_bool(values: dict, key: str, default: bool) -> bool:
        if key not in values:
            return default
        raw = values.pop(key).strip().lower()
        if raw not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
            raise ValueError(f"[{key}] expected a boolean, got {raw!r}")
        return raw in ("true", "1", "yes", "on")

    known = {"env", "rewards", "pilot", "shield", "scaling", "a2c", "train"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")

    values = section("env")
    mode = values.pop("mode", base.env.mode)
    env_kwargs = dict(
        mode=mode,
        shield_enabled=pop_bool(values, "shield_enabled",
                                base.env.shield_enabled),
        tick_duration=pop_float(values, "tick_duration",
                                base.env.tick_duration),
        standstill_speed=pop_float(values, "standstill_speed",
                                   base.env.standstill_speed),
        standstill_hold=pop_float(values, "standstill_hold",
                                  base.env.standstill_hold),
        neighbor_sentinel=pop_float(values, "neighbor_sentinel",
                                    base.env.neighbor_sentinel),
    )
    if values:
        raise ValueError(f"unknown [env] keys: {sorted(values)}")

    values = section("rewards")
    rewards = dict(base.env.rewards)
    for key, reason in _REWARD_KEYS.items():
        rewards[reason] = pop_float(values, key, rewards[reason])
    if values:
        raise ValueError(f"unknown [rewards] keys: {sorted(values)}")

    values = section("pilot")
    accel_table = dict(base.env.pilot.accel_table)
    for key, lon in _ACCEL_KEYS.items():
        accel_table[lon] = pop_float(values, key, accel_table[lon])
    pilot = PilotConfig(
        t_lc=pop_float(values, "t_lc", base.env.pilot.t_lc),
        k_y=pop_float(values, "k_y", base.env.pilot.k_y),
        k_psi=pop_float(values, "k_psi", base.env.pilot.k_psi),
        k_d=pop_float(values, "k_d", base.env.pilot.k_d),
        accel_table=accel_table,
    )
    if values:
        raise ValueError(f"unknown [pilot] keys: {sorted(values)}")

    values = section("shield")
    shield_cfg = ShieldConfig(
        horizon=pop_float(values, "horizon", base.env.shield.horizon))
    if values:
        raise ValueError(f"unknown [shield] keys: {sorted(values)}")

    values = section("scaling")
    scaling = ObservationScaling(
        **{name: pop_float(values, name, getattr(base.env.scaling, name))
           for name in ("v_max", "lane_max", "lateral_max", "dist_max",
                        "rel_x_max", "rel_v_max")})
    if values:
        raise ValueError(f"unknown [scaling] keys: {sorted(values)}")

    values = section("a2c")
    a2c = A2cConfig(
        gamma=pop_float(values, "gamma", base.a2c.gamma),
        n_steps=pop_int(values, "n_steps", base.a2c.n_steps),
        lr=pop_float(values, "lr", base.a2c.lr),
        entropy_coef=pop_float(values, "entropy_coef", base.a2c.entropy_coef),
        value_coef=pop_float(values, "value_coef", base.a2c.value_coef),
        grad_clip=pop_float(values, "grad_clip", base.a2c.grad_clip),
        rmsprop_alpha=pop_float(values, "rmsprop_alpha", base.a2c.rmsprop_alpha),
        rmsprop_eps=pop_float(values, "rmsprop_eps", base.a2c.rmsprop_eps),
        hidden=(pop_int(values, "hidden1", base.a2c.hidden[0]),
                pop_int(values, "hidden2", base.a2c.hidden[1])),
        seed=pop_int(values, "seed", base.a2c.seed),
    )
    if values:
        raise ValueError(f"unknown [a2c] keys: {sorted(values)}")

    values = section("train")
    train = TrainOptions(
        log_wall_time=pop_bool(values, "log_wall_time",
                               base.train.log_wall_time),
        checkpoint_every=pop_int(values, "checkpoint_every",
                                 base.train.checkpoint_every),
    )
    if values:
        raise ValueError(f"unknown [train] keys: {sorted(values)}")

    env = EnvConfig(rewards=rewards, scaling=scaling, shield=shield_cfg,
                    pilot=pilot, **env_kwargs)
    return RunConfig(env=env, a2c=a2c, train=train)


def load_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return from_ini(fh.read())


def save_file(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_ini(config))
