"""Policies: maintain/random baselines and small actor-critic learners
(discrete option heads, and a Gaussian head for the continuous-control
ablation) built on a self-contained numpy MLP with manual backprop.

The loss is the n-step advantage actor-critic objective: summed policy
gradient with detached advantages, squared value error, and an entropy
bonus; one RMSProp step per rollout with global gradient-norm clipping.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .env import Observation, ObservationScaling
from .pilot import (MAINTAIN_ACTION, N_LAT_OPTIONS as N_LAT,
                    N_LON_OPTIONS as N_LON, HighLevelAction)
from .road import DEFAULT_PARAMS

LOG_STD_FLOOR = -5.0

CHECKPOINT_FORMAT = "sadsim-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class A2cConfig:
    gamma: float = 0.99
    n_steps: int = 5
    lr: float = 7e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    grad_clip: float = 0.5
    rmsprop_alpha: float = 0.99
    rmsprop_eps: float = 1e-5
    hidden: tuple[int, int] = (64, 64)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to build; tag determines the legal env mode."""

    tag: str  # maintain | random | a2c_discrete | a2c_continuous
    a2c: A2cConfig = A2cConfig()
    scaling: ObservationScaling = ObservationScaling()

    TAGS = ("maintain", "random", "a2c_discrete", "a2c_continuous")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown policy tag {self.tag!r}")

    @property
    def env_mode(self) -> str:
        return "continuous" if self.tag == "a2c_continuous" else "hierarchical"


# ---------------------------------------------------------------------------
# Parameters


class MlpParams:
    """Ordered name -> float64 array mapping for the 2-hidden-layer net."""

    def __init__(self, arrays: dict[str, np.ndarray], mode: str,
                 obs_dim: int, hidden: tuple[int, int]):
        self.arrays = arrays
        self.mode = mode
        self.obs_dim = obs_dim
        self.hidden = tuple(hidden)

    @staticmethod
    def _head_shapes(mode: str, h2: int) -> dict[str, tuple]:
        if mode == "discrete":
            return {"w_lat": (h2, N_LAT), "b_lat": (N_LAT,),
                    "w_lon": (h2, N_LON), "b_lon": (N_LON,),
                    "w_val": (h2, 1), "b_val": (1,)}
        if mode == "continuous":
            return {"w_mean": (h2, 2), "b_mean": (2,), "log_std": (2,),
                    "w_val": (h2, 1), "b_val": (1,)}
        raise ValueError(f"unknown mode {mode!r}")

    @classmethod
    def shapes(cls, obs_dim: int, hidden: tuple[int, int],
               mode: str) -> dict[str, tuple]:
        h1, h2 = hidden
        out = {"w1": (obs_dim, h1), "b1": (h1,), "w2": (h1, h2), "b2": (h2,)}
        out.update(cls._head_shapes(mode, h2))
        return out

    @classmethod
    def zeros(cls, obs_dim: int, hidden=(64, 64), mode="discrete"):
        arrays = {name: np.zeros(shape, dtype=np.float64)
                  for name, shape in cls.shapes(obs_dim, hidden, mode).items()}
        return cls(arrays, mode, obs_dim, hidden)

    @classmethod
    def init(cls, obs_dim: int, hidden=(64, 64), mode="discrete",
             rng: Optional[np.random.Generator] = None):
        """Fan-in scaled normal init; policy heads start small so the
        initial policy is near uniform."""
        rng = rng if rng is not None else np.random.default_rng(0)
        params = cls.zeros(obs_dim, hidden, mode)
        small_heads = ("w_lat", "w_lon", "w_mean")
        for name, arr in params.arrays.items():
            if name == "log_std":
                arr[:] = -0.5
            elif name.startswith("w"):
                fan_in = arr.shape[0]
                scale = 1.0 / math.sqrt(fan_in)
                if name in small_heads:
                    scale *= 0.01
                arr[:] = rng.normal(0.0, scale, size=arr.shape)
        return params

    def copy(self) -> "MlpParams":
        return MlpParams({k: v.copy() for k, v in self.arrays.items()},
                         self.mode, self.obs_dim, self.hidden)

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays.values()])

    def set_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for arr in self.arrays.values():
            n = arr.size
            arr[:] = flat[pos:pos + n].reshape(arr.shape)
            pos += n
        if pos != flat.size:
            raise ValueError("flat vector size mismatch")

    # -- checkpoint I/O -----------------------------------------------------

    def to_checkpoint(self, extra: Optional[dict] = None) -> dict:
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "mode": self.mode,
            "obs_dim": self.obs_dim,
            "hidden": list(self.hidden),
            "arrays": {
                name: {"shape": list(arr.shape),
                       "data": base64.b64encode(
                           np.ascontiguousarray(arr, dtype="<f8").tobytes()
                       ).decode("ascii")}
                for name, arr in self.arrays.items()
            },
        }
        if extra:
            doc["extra"] = extra
        return doc

    @classmethod
    def from_checkpoint(cls, doc: dict) -> "MlpParams":
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a checkpoint document")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
        mode = doc["mode"]
        obs_dim = int(doc["obs_dim"])
        hidden = tuple(doc["hidden"])
        params = cls.zeros(obs_dim, hidden, mode)
        for name, arr in params.arrays.items():
            entry = doc["arrays"][name]
            data = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8")
            arr[:] = data.reshape(entry["shape"])
        return params


# ---------------------------------------------------------------------------
# Forward / backward


def _trunk(params: MlpParams, X: np.ndarray):
    a = params.arrays
    h1 = np.tanh(X @ a["w1"] + a["b1"])
    h2 = np.tanh(h1 @ a["w2"] + a["b2"])
    return h1, h2


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def a2c_forward(params: MlpParams, obs: np.ndarray):
    """Discrete heads: (lateral logits, longitudinal logits, value).

    Accepts a single observation vector or a batch.
    """
    single = obs.ndim == 1
    X = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    a = params.arrays
    _, h2 = _trunk(params, X)
    lat = h2 @ a["w_lat"] + a["b_lat"]
    lon = h2 @ a["w_lon"] + a["b_lon"]
    val = (h2 @ a["w_val"] + a["b_val"])[:, 0]
    if single:
        return lat[0], lon[0], float(val[0])
    return lat, lon, val


def a2c_continuous_forward(params: MlpParams, obs: np.ndarray):
    """Gaussian head: (mean, effective log-std, value). The log-std is a
    state-independent parameter floored at LOG_STD_FLOOR."""
    single = obs.ndim == 1
    X = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    a = params.arrays
    _, h2 = _trunk(params, X)
    mean = h2 @ a["w_mean"] + a["b_mean"]
    log_std = np.maximum(a["log_std"], LOG_STD_FLOOR)
    val = (h2 @ a["w_val"] + a["b_val"])[:, 0]
    if single:
        return mean[0], log_std, float(val[0])
    return mean, log_std, val


def _backprop_trunk(params, X, h1, h2, d_h2, grads):
    a = params.arrays
    d_pre2 = d_h2 * (1.0 - h2 * h2)
    grads["w2"] = h1.T @ d_pre2
    grads["b2"] = d_pre2.sum(axis=0)
    d_h1 = d_pre2 @ a["w2"].T
    d_pre1 = d_h1 * (1.0 - h1 * h1)
    grads["w1"] = X.T @ d_pre1
    grads["b1"] = d_pre1.sum(axis=0)


def a2c_loss_and_grad(params: MlpParams, obs: np.ndarray, actions: np.ndarray,
                      returns: np.ndarray, advantages: np.ndarray,
                      config: A2cConfig):
    """Discrete A2C loss and analytic gradients.

    `returns` and `advantages` enter as constants (no gradient flows
    through them), matching the bootstrapped-and-detached update.
    """
    X = np.asarray(obs, dtype=np.float64)
    B = X.shape[0]
    a = params.arrays
    h1, h2 = _trunk(params, X)
    lat = h2 @ a["w_lat"] + a["b_lat"]
    lon = h2 @ a["w_lon"] + a["b_lon"]
    values = (h2 @ a["w_val"] + a["b_val"])[:, 0]

    logp_lat = _log_softmax(lat)
    logp_lon = _log_softmax(lon)
    p_lat = np.exp(logp_lat)
    p_lon = np.exp(logp_lon)
    rows = np.arange(B)
    a_lat = actions[:, 0]
    a_lon = actions[:, 1]

    logp_act = logp_lat[rows, a_lat] + logp_lon[rows, a_lon]
    ent_lat = -(p_lat * logp_lat).sum(axis=1)
    ent_lon = -(p_lon * logp_lon).sum(axis=1)
    entropy = ent_lat + ent_lon

    policy_loss = float(-(advantages * logp_act).sum())
    value_loss = float(((returns - values) ** 2).sum())
    entropy_sum = float(entropy.sum())
    loss = (policy_loss + config.value_coef * value_loss
            - config.entropy_coef * entropy_sum)

    # d loss / d logits: policy-gradient term plus entropy bonus.
    onehot_lat = np.zeros_like(p_lat)
    onehot_lat[rows, a_lat] = 1.0
    onehot_lon = np.zeros_like(p_lon)
    onehot_lon[rows, a_lon] = 1.0
    d_lat = (-advantages[:, None] * (onehot_lat - p_lat)
             + config.entropy_coef * p_lat * (logp_lat + ent_lat[:, None]))
    d_lon = (-advantages[:, None] * (onehot_lon - p_lon)
             + config.entropy_coef * p_lon * (logp_lon + ent_lon[:, None]))
    d_val = (-2.0 * config.value_coef * (returns - values))[:, None]

    grads = {
        "w_lat": h2.T @ d_lat, "b_lat": d_lat.sum(axis=0),
        "w_lon": h2.T @ d_lon, "b_lon": d_lon.sum(axis=0),
        "w_val": h2.T @ d_val, "b_val": d_val.sum(axis=0),
    }
    d_h2 = d_lat @ a["w_lat"].T + d_lon @ a["w_lon"].T + d_val @ a["w_val"].T
    _backprop_trunk(params, X, h1, h2, d_h2, grads)

    diag = {"policy_loss": policy_loss, "value_loss": value_loss,
            "entropy": entropy_sum, "loss": loss}
    return loss, grads, diag


def a2c_continuous_loss_and_grad(params: MlpParams, obs: np.ndarray,
                                 z_actions: np.ndarray, returns: np.ndarray,
                                 advantages: np.ndarray, config: A2cConfig):
    """Gaussian A2C loss and gradients over pre-squash action samples."""
    X = np.asarray(obs, dtype=np.float64)
    B = X.shape[0]
    a = params.arrays
    h1, h2 = _trunk(params, X)
    mean = h2 @ a["w_mean"] + a["b_mean"]
    raw_log_std = a["log_std"]
    log_std = np.maximum(raw_log_std, LOG_STD_FLOOR)
    std = np.exp(log_std)
    values = (h2 @ a["w_val"] + a["b_val"])[:, 0]

    zc = (z_actions - mean) / std
    logp = (-0.5 * zc ** 2 - log_std - 0.5 * math.log(2.0 * math.pi)).sum(axis=1)
    entropy_per = (0.5 + 0.5 * math.log(2.0 * math.pi) + log_std).sum()
    entropy_sum = float(B * entropy_per)

    policy_loss = float(-(advantages * logp).sum())
    value_loss = float(((returns - values) ** 2).sum())
    loss = (policy_loss + config.value_coef * value_loss
            - config.entropy_coef * entropy_sum)

    d_mean = -advantages[:, None] * (zc / std)
    d_log_std_rows = -advantages[:, None] * (zc ** 2 - 1.0)
    d_log_std = d_log_std_rows.sum(axis=0) - config.entropy_coef * B
    # Clamped entries pass no gradient to the raw parameter.
    d_log_std = d_log_std * (raw_log_std > LOG_STD_FLOOR)
    d_val = (-2.0 * config.value_coef * (returns - values))[:, None]

    grads = {
        "w_mean": h2.T @ d_mean, "b_mean": d_mean.sum(axis=0),
        "log_std": d_log_std,
        "w_val": h2.T @ d_val, "b_val": d_val.sum(axis=0),
    }
    d_h2 = d_mean @ a["w_mean"].T + d_val @ a["w_val"].T
    _backprop_trunk(params, X, h1, h2, d_h2, grads)

    diag = {"policy_loss": policy_loss, "value_loss": value_loss,
            "entropy": entropy_sum, "loss": loss}
    return loss, grads, diag


class RmsProp:
    """RMSProp with global gradient-norm clipping."""

    def __init__(self, params: MlpParams, config: A2cConfig):
        self.lr = config.lr
        self.alpha = config.rmsprop_alpha
        self.eps = config.rmsprop_eps
        self.clip = config.grad_clip
        self.cache = {name: np.zeros_like(arr)
                      for name, arr in params.arrays.items()}

    def step(self, params: MlpParams, grads: dict) -> float:
        total = 0.0
        for g in grads.values():
            total += float((g * g).sum())
        norm = math.sqrt(total)
        scale = 1.0 if norm <= self.clip else self.clip / norm
        for name, arr in params.arrays.items():
            g = grads[name] * scale
            c = self.cache[name]
            c *= self.alpha
            c += (1.0 - self.alpha) * g * g
            arr -= self.lr * g / (np.sqrt(c) + self.eps)
        return norm


# ---------------------------------------------------------------------------
# Policies


def act_maintain(obs: Observation) -> HighLevelAction:
    return MAINTAIN_ACTION


def act_random(obs: Observation, rng: np.random.Generator) -> HighLevelAction:
    return HighLevelAction.from_indices(int(rng.integers(N_LAT)),
                                        int(rng.integers(N_LON)))


class MaintainPolicy:
    mode = "hierarchical"
    deterministic = True
    tag = "maintain"

    def begin_episode(self, seed: int) -> None:
        pass

    def act(self, obs: Observation) -> HighLevelAction:
        return act_maintain(obs)


class RandomPolicy:
    mode = "hierarchical"
    deterministic = False
    tag = "random"

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)

    def begin_episode(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def act(self, obs: Observation) -> HighLevelAction:
        return act_random(obs, self._rng)


class _Transition:
    __slots__ = ("obs", "action", "reward", "done")

    def __init__(self, obs, action, reward, done):
        self.obs = obs
        self.action = action
        self.reward = reward
        self.done = done


class DiscreteA2C:
    """Factored-head option policy; sampling in training, argmax in
    greedy evaluation."""

    mode = "hierarchical"
    tag = "a2c_discrete"

    def __init__(self, obs_dim: int, config: A2cConfig = A2cConfig(),
                 scaling: ObservationScaling = ObservationScaling(),
                 params: Optional[MlpParams] = None, greedy: bool = False):
        self.config = config
        self.scaling = scaling
        rng = np.random.default_rng(config.seed)
        self.params = params if params is not None else MlpParams.init(
            obs_dim, config.hidden, "discrete", rng)
        self.optimizer = RmsProp(self.params, config)
        self.greedy = greedy
        self._rng = np.random.default_rng(config.seed)
        self._buffer: list[_Transition] = []
        self.updates = 0
        self.last_diag: dict = {}

    @property
    def deterministic(self) -> bool:
        return self.greedy

    def begin_episode(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def act(self, obs: Observation) -> HighLevelAction:
        vec = obs.to_vector(self.scaling)
        lat_logits, lon_logits, _ = a2c_forward(self.params, vec)
        if self.greedy:
            lat = int(np.argmax(lat_logits))
            lon = int(np.argmax(lon_logits))
        else:
            lat = _sample_categorical(lat_logits, self._rng)
            lon = _sample_categorical(lon_logits, self._rng)
        self._last_obs_vec = vec
        return HighLevelAction.from_indices(lat, lon)

    # -- training ----------------------------------------------------------

    def record(self, action: HighLevelAction, reward: float, done: bool,
               next_obs: Observation) -> None:
        self._buffer.append(_Transition(self._last_obs_vec, action.indices,
                                        reward, done))
        if done or len(self._buffer) >= self.config.n_steps:
            self._update(next_obs)

    def _update(self, next_obs: Observation) -> None:
        batch = self._buffer
        self._buffer = []
        if not batch:
            return
        cfg = self.config
        if batch[-1].done:
            bootstrap = 0.0
        else:
            vec = next_obs.to_vector(self.scaling)
            bootstrap = a2c_forward(self.params, vec)[2]
        X = np.stack([tr.obs for tr in batch])
        actions = np.array([tr.action for tr in batch], dtype=np.int64)
        returns = np.empty(len(batch))
        acc = bootstrap
        for i in range(len(batch) - 1, -1, -1):
            acc = batch[i].reward + cfg.gamma * acc * (0.0 if batch[i].done else 1.0)
            returns[i] = acc
        values = a2c_forward(self.params, X)[2]
        advantages = returns - values
        loss, grads, diag = a2c_loss_and_grad(self.params, X, actions,
                                              returns, advantages, cfg)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite A2C loss: {diag}")
        diag["grad_norm"] = self.optimizer.step(self.params, grads)
        self.updates += 1
        self.last_diag = diag


class ContinuousA2C:
    """Gaussian-head variant driving (acceleration, steering rate)
    directly; samples are tanh-squashed onto the actuator bounds."""

    mode = "continuous"
    tag = "a2c_continuous"

    def __init__(self, obs_dim: int, config: A2cConfig = A2cConfig(),
                 scaling: ObservationScaling = ObservationScaling(),
                 params: Optional[MlpParams] = None, greedy: bool = False,
                 accel_bounds: tuple[float, float] = (DEFAULT_PARAMS.a_min,
                                                      DEFAULT_PARAMS.a_max),
                 steer_rate_max: float = DEFAULT_PARAMS.vdelta_max):
        self.config = config
        self.scaling = scaling
        rng = np.random.default_rng(config.seed)
        self.params = params if params is not None else MlpParams.init(
            obs_dim, config.hidden, "continuous", rng)
        self.optimizer = RmsProp(self.params, config)
        self.greedy = greedy
        self.accel_bounds = accel_bounds
        self.steer_rate_max = steer_rate_max
        self._rng = np.random.default_rng(config.seed)
        self._buffer: list[_Transition] = []
        self.updates = 0
        self.last_diag: dict = {}

    @property
    def deterministic(self) -> bool:
        return self.greedy

    def begin_episode(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def squash(self, z: np.ndarray) -> tuple[float, float]:
        lo, hi = self.accel_bounds
        accel = lo + (math.tanh(z[0]) + 1.0) * 0.5 * (hi - lo)
        steer = self.steer_rate_max * math.tanh(z[1])
        return accel, steer

    def act(self, obs: Observation) -> tuple[float, float]:
        vec = obs.to_vector(self.scaling)
        mean, log_std, _ = a2c_continuous_forward(self.params, vec)
        if self.greedy:
            z = mean
        else:
            z = mean + np.exp(log_std) * self._rng.standard_normal(2)
        self._last_obs_vec = vec
        self._last_z = z
        return self.squash(z)

    def record(self, reward: float, done: bool, next_obs: Observation) -> None:
        self._buffer.append(_Transition(self._last_obs_vec,
                                        self._last_z.copy(), reward, done))
        if done or len(self._buffer) >= self.config.n_steps:
            self._update(next_obs)

    def _update(self, next_obs: Observation) -> None:
        batch = self._buffer
        self._buffer = []
        if not batch:
            return
        cfg = self.config
        if batch[-1].done:
            bootstrap = 0.0
        else:
            vec = next_obs.to_vector(self.scaling)
            bootstrap = a2c_continuous_forward(self.params, vec)[2]
        X = np.stack([tr.obs for tr in batch])
        z = np.stack([tr.action for tr in batch])
        returns = np.empty(len(batch))
        acc = bootstrap
        for i in range(len(batch) - 1, -1, -1):
            acc = batch[i].reward + cfg.gamma * acc * (0.0 if batch[i].done else 1.0)
            returns[i] = acc
        values = a2c_continuous_forward(self.params, X)[2]
        advantages = returns - values
        loss, grads, diag = a2c_continuous_loss_and_grad(
            self.params, X, z, returns, advantages, cfg)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite A2C loss: {diag}")
        diag["grad_norm"] = self.optimizer.step(self.params, grads)
        self.updates += 1
        self.last_diag = diag


def _sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> int:
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    return int(np.searchsorted(np.cumsum(p), rng.random()))


def make_policy(spec: PolicySpec, obs_dim: int,
                params: Optional[MlpParams] = None, greedy: bool = False):
    if spec.tag == "maintain":
        return MaintainPolicy()
    if spec.tag == "random":
        return RandomPolicy(spec.a2c.seed)
    if spec.tag == "a2c_discrete":
        return DiscreteA2C(obs_dim, spec.a2c, spec.scaling, params, greedy)
    return ContinuousA2C(obs_dim, spec.a2c, spec.scaling, params, greedy)


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainEpisode:
    index: int
    scenario_id: str
    kind: str
    reason: str
    ret: float
    length: int
    wall_time: float = 0.0


@dataclass
class TrainResult:
    params: Optional[MlpParams]
    episodes: list[TrainEpisode]
    substeps: int
    updates: int


def train(env_factory: Callable[[], "object"], scenarios: list,
          spec: PolicySpec, total_substeps: int, seed: int,
          log_wall_time: bool = False,
          checkpoint_cb: Optional[Callable[[int, Optional[MlpParams]], None]] = None,
          checkpoint_every: int = 0,
          init_params: Optional[MlpParams] = None) -> TrainResult:
    """Scenario-sampled episodic training for a fixed sub-step budget.

    Episodes draw uniformly from `scenarios` under a seeded stream; the
    budget is checked at episode boundaries, so a zero budget returns the
    initial parameters and an empty log. Fully deterministic for a given
    (scenarios, spec, budget, seed) apart from optional wall times.
    """
    import time

    from .env import OBS_DIM

    env = env_factory()
    if env.config.mode != spec.env_mode:
        raise ValueError(f"policy {spec.tag!r} needs env mode "
                         f"{spec.env_mode!r}, got {env.config.mode!r}")
    policy = make_policy(replace(spec, a2c=replace(spec.a2c, seed=seed)),
                         OBS_DIM, params=init_params)
    trainable = spec.tag.startswith("a2c")
    ss = np.random.SeedSequence(seed)
    scen_rng = np.random.default_rng(ss.spawn(1)[0])
    episodes: list[TrainEpisode] = []
    ep_index = 0

    while env.substeps_total < total_substeps:
        scenario = scenarios[int(scen_rng.integers(len(scenarios)))]
        started = time.perf_counter() if log_wall_time else 0.0
        start_substeps = env.substeps_total
        obs = env.reset(seed=ep_index, scenario=scenario)
        policy.begin_episode(seed=ep_index + 1)
        ep_return = 0.0
        reason = None
        while True:
            if spec.env_mode == "hierarchical":
                action = policy.act(obs)
                outcome = env.step(action)
                if trainable:
                    policy.record(action, outcome.reward, outcome.terminated,
                                  outcome.obs)
            else:
                accel, steer = policy.act(obs)
                outcome = env.step_continuous(accel, steer)
                if trainable:
                    policy.record(outcome.reward, outcome.terminated,
                                  outcome.obs)
            obs = outcome.obs
            ep_return += outcome.reward
            if outcome.terminated:
                reason = outcome.reason
                break
        episodes.append(TrainEpisode(
            index=ep_index, scenario_id=scenario.id, kind=scenario.kind,
            reason=reason.value, ret=ep_return,
            length=env.substeps_total - start_substeps,
            wall_time=(time.perf_counter() - started) if log_wall_time else 0.0))
        ep_index += 1
        if (checkpoint_cb is not None and checkpoint_every > 0
                and ep_index % checkpoint_every == 0):
            checkpoint_cb(ep_index, getattr(policy, "params", None))

    return TrainResult(params=getattr(policy, "params", None),
                       episodes=episodes, substeps=env.substeps_total,
                       updates=getattr(policy, "updates", 0))
