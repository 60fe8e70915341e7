"""Advantage actor-critic bitrate agent: state assembly, return/advantage
estimation, the parallel-worker training loop and greedy evaluation."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .nn import NetworkConfig, ParameterSet
from .playback import EpisodeLog, Observation, PlaybackState, VideoSpec, run_episode, MAX_BUFFER_S
from .qoe import EpisodeSummary, QoEConfig, score_episode, summarize
from .sensors import QuantizerConfig, accel_magnitude, quantize
from .traces import Trace, TraceSample, atomic_write_bytes, atomic_write_text

log = logging.getLogger(__name__)

# Throughput normalizer for the history entries (corpus maximum).
THROUGHPUT_SCALE_MBPS = 20.0


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    actor_lr: float = 3e-5
    critic_lr: float = 1e-2
    entropy_start: float = 1.0
    entropy_end: float = 0.1
    entropy_decay_episodes: int | None = None  # None: first half of training
    workers: int = 10
    episodes: int = 5000
    eval_every: int = 0  # episodes; 0 disables periodic validation
    val_fraction: float = 0.1
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" | "rmsprop" | "adam"
    n_step: int | None = None  # None: bootstrap only at the end of the episode
    advantage_norm: bool = False
    update_mode: str = "episode"  # "episode" | "chunk"
    buffer_dynamics: bool = True
    executor: str = "serial"  # "serial" | "process"
    checkpoint_every: int = 0  # updates; 0 disables periodic checkpoints

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.workers < 1 or self.episodes < 1:
            raise ValueError("workers and episodes must be >= 1")
        if self.update_mode not in ("episode", "chunk"):
            raise ValueError(f"unknown update_mode {self.update_mode!r}")
        if self.executor not in ("serial", "process"):
            raise ValueError(f"unknown executor {self.executor!r}")
        if self.n_step is not None and self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")

    def entropy_weight(self, episodes_seen: int) -> float:
        span = self.entropy_decay_episodes or max(self.episodes // 2, 1)
        frac = min(episodes_seen / span, 1.0)
        return self.entropy_start + (self.entropy_end - self.entropy_start) * frac


# ----------------------------------------------------------------------------
# State


def sensor_features(sample: TraceSample, mode: str, qcfg: QuantizerConfig = QuantizerConfig()) -> tuple[float, float, float]:
    if mode == "quantized":
        return tuple(float(v) for v in quantize(sample, qcfg))
    if mode == "none":
        return (0.0, 0.0, 0.0)
    if mode == "raw":
        return (sample.distance / 50.0, sample.velocity / 20.0, accel_magnitude(sample.accel, qcfg.accel_mode) / 20.0)
    raise ValueError(f"unknown sensor mode {mode!r}")


def history_window(history: Sequence[float], window: int) -> np.ndarray:
    """Last ``window`` entries, zero-padded at the front."""
    out = np.zeros(window)
    tail = list(history)[-window:] if window else []
    if tail:
        out[window - len(tail) :] = tail
    return out


def assemble_state(sensors, playback: PlaybackState, history: Sequence[float], spec: VideoSpec) -> np.ndarray:
    """[d, v, a, buffer/20, level/(K-1), x_1..x_W / 20] with the newest x last."""
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 1:
        raise ValueError("history must be one-dimensional")
    s = np.empty(5 + hist.size)
    s[:3] = tuple(sensors)
    s[3] = playback.buffer_s / MAX_BUFFER_S
    K = len(spec.ladder)
    s[4] = playback.last_level / (K - 1) if K > 1 else 0.0
    s[5:] = hist / THROUGHPUT_SCALE_MBPS
    return s


def observation_state(obs: Observation, net_cfg: NetworkConfig, qcfg: QuantizerConfig) -> np.ndarray:
    hist = history_window(obs.history, net_cfg.throughput_window)
    return assemble_state(sensor_features(obs.sensors, net_cfg.sensor_mode, qcfg), obs.state, hist, obs.spec)


# ----------------------------------------------------------------------------
# Returns and advantages


def discounted_return(rewards: Sequence[float], gamma: float) -> np.ndarray:
    r = np.asarray(rewards, dtype=float)
    out = np.empty_like(r)
    acc = 0.0
    for t in range(r.size - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


def n_step_targets(rewards: Sequence[float], bootstrap: float, gamma: float) -> np.ndarray:
    """Q_t = sum_k gamma^k r_{t+k} + gamma^(n-t) * bootstrap over one segment."""
    r = np.asarray(rewards, dtype=float)
    out = np.empty_like(r)
    acc = float(bootstrap)
    for t in range(r.size - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


def truncated_targets(rewards: Sequence[float], values: Sequence[float], gamma: float, n: int) -> np.ndarray:
    """n-step targets bootstrapped from ``values[t+n]`` inside a finished episode."""
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    T = r.size
    out = np.empty(T)
    for t in range(T):
        end = min(t + n, T)
        boot = v[end] if end < T else 0.0
        out[t] = n_step_targets(r[t:end], boot, gamma)[0]
    return out


def advantage(Q, V):
    return np.asarray(Q, dtype=float) - np.asarray(V, dtype=float) if np.ndim(Q) else float(Q) - float(V)


def actor_objective(states, actions, advantages, params: ParameterSet, net_cfg: NetworkConfig,
                    entropy_weight: float, rng: np.random.Generator | None = None) -> nn.ObjectiveResult:
    batch = nn.ActorBatch(np.asarray(states), np.asarray(actions), np.asarray(advantages, dtype=float), entropy_weight)
    return nn.backward("actor", batch, params, net_cfg, train_mode=rng is not None, rng=rng)


def critic_objective(states, targets, params: ParameterSet, net_cfg: NetworkConfig,
                     rng: np.random.Generator | None = None) -> nn.ObjectiveResult:
    batch = nn.CriticBatch(np.asarray(states), np.asarray(targets, dtype=float))
    return nn.backward("critic", batch, params, net_cfg, train_mode=rng is not None, rng=rng)


def sample_action(probs, rng: np.random.Generator) -> int:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or not np.all(np.isfinite(p)) or np.any(p < 0) or p.sum() <= 0:
        raise ValueError(f"degenerate action distribution {p}")
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), p.size - 1))


def greedy_action(probs) -> int:
    # np.argmax returns the lowest index among ties.
    return int(np.argmax(probs))


# ----------------------------------------------------------------------------
# Episodes


@dataclass
class Episode:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log: EpisodeLog

    @property
    def dones(self) -> np.ndarray:
        d = np.zeros(len(self.actions), dtype=bool)
        d[-1] = True
        return d


def play(
    trace: Trace,
    spec: VideoSpec,
    actor: ParameterSet,
    net_cfg: NetworkConfig,
    qoe_cfg: QoEConfig,
    qcfg: QuantizerConfig = QuantizerConfig(),
    t0: float = 0.0,
    rng: np.random.Generator | None = None,
    buffer_dynamics: bool = True,
) -> Episode:
    """One episode; stochastic actions when ``rng`` is given, greedy otherwise."""
    states, actions = [], []

    def policy(obs: Observation) -> int:
        s = observation_state(obs, net_cfg, qcfg)
        p = nn.policy_forward(s, actor, net_cfg)
        a = sample_action(p, rng) if rng is not None else greedy_action(p)
        states.append(s)
        actions.append(a)
        return a

    ep_log = run_episode(trace, spec, policy, t0=t0, buffer_dynamics=buffer_dynamics)
    score_episode(ep_log, spec.ladder, qoe_cfg)
    rewards = np.array([r.reward for r in ep_log.records])
    return Episode(np.array(states), np.array(actions, dtype=int), rewards, ep_log)


@dataclass(frozen=True)
class _WorkerJob:
    traces: tuple
    spec: VideoSpec
    actor: dict
    net_cfg: NetworkConfig
    qoe_cfg: QoEConfig
    qcfg: QuantizerConfig
    seed: int
    worker_id: int
    counter: int
    buffer_dynamics: bool


def _worker_episode(job: _WorkerJob) -> Episode:
    rng = np.random.default_rng([job.seed, job.worker_id, job.counter])
    trace = job.traces[int(rng.integers(len(job.traces)))]
    t0 = float(rng.uniform(0.0, trace.duration))
    return play(trace, job.spec, job.actor, job.net_cfg, job.qoe_cfg, job.qcfg, t0=t0, rng=rng,
                buffer_dynamics=job.buffer_dynamics)


# ----------------------------------------------------------------------------
# Checkpoints


@dataclass
class Checkpoint:
    actor: ParameterSet
    critic: ParameterSet
    net_cfg: NetworkConfig
    train_cfg: TrainConfig | None = None

    def check(self) -> None:
        for role, params, outputs in (("actor", self.actor, self.net_cfg.num_actions), ("critic", self.critic, 1)):
            expected = nn.param_shapes(self.net_cfg, outputs)
            got = {k: v.shape for k, v in params.items()}
            if got != expected:
                raise ValueError(f"{role} parameters do not match the network config")

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        merged = {f"actor/{k}": v for k, v in self.actor.items()}
        merged.update({f"critic/{k}": v for k, v in self.critic.items()})
        meta = {"network": asdict(self.net_cfg), "train": asdict(self.train_cfg) if self.train_cfg else None}
        atomic_write_text(path.with_name(path.name + ".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
        atomic_write_bytes(path, nn.dumps_params(merged))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Checkpoint":
        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        merged = nn.load_params(path)
        actor = {k.split("/", 1)[1]: v for k, v in merged.items() if k.startswith("actor/")}
        critic = {k.split("/", 1)[1]: v for k, v in merged.items() if k.startswith("critic/")}
        net_cfg = NetworkConfig(**meta["network"])
        train_cfg = TrainConfig(**meta["train"]) if meta.get("train") else None
        ck = cls(actor, critic, net_cfg, train_cfg)
        ck.check()
        return ck


# ----------------------------------------------------------------------------
# Training


TRAIN_LOG_COLUMNS = ("update", "episodes_seen", "mean_reward", "mean_entropy", "actor_obj", "critic_loss")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    rows: list[dict] = field(default_factory=list)
    validation: list[tuple[int, float]] = field(default_factory=list)
    episode_rewards: list[float] = field(default_factory=list)  # mean per-chunk reward, per episode

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAIN_LOG_COLUMNS)
        for r in self.rows:
            w.writerow([r["update"], r["episodes_seen"]] + [repr(float(r[c])) for c in TRAIN_LOG_COLUMNS[2:]])
        return buf.getvalue()


def _collect(jobs: list[_WorkerJob], pool) -> list[Episode]:
    if pool is None:
        return [_worker_episode(j) for j in jobs]
    return list(pool.map(_worker_episode, jobs))


def train(
    traces: Sequence[Trace],
    spec: VideoSpec,
    net_cfg: NetworkConfig,
    train_cfg: TrainConfig,
    qoe_cfg: QoEConfig = QoEConfig(),
    qcfg: QuantizerConfig = QuantizerConfig(),
    checkpoint_path: str | os.PathLike | None = None,
) -> TrainResult:
    """Central-learner A2C: every update consumes one episode per worker."""
    if not traces:
        raise ValueError("empty training set")
    if net_cfg.num_actions != len(spec.ladder):
        raise ValueError("num_actions must equal the ladder length")
    cfg = train_cfg
    traces = list(traces)
    val: list[Trace] = []
    if cfg.eval_every and cfg.val_fraction > 0 and len(traces) > 1:
        order = np.random.default_rng([cfg.seed, 7]).permutation(len(traces))
        n_val = max(1, int(round(cfg.val_fraction * len(traces))))
        val = [traces[i] for i in sorted(order[:n_val])]
        traces = [traces[i] for i in sorted(order[n_val:])]

    actor = nn.init_params(net_cfg, seed=cfg.seed, outputs=net_cfg.num_actions)
    critic = nn.init_params(net_cfg, seed=cfg.seed + 1, outputs=1)
    actor_opt = nn.make_optimizer(cfg.optimizer, cfg.actor_lr)
    critic_opt = nn.make_optimizer(cfg.optimizer, cfg.critic_lr)
    result = TrainResult(Checkpoint(actor, critic, net_cfg, cfg))
    frozen = tuple(traces)

    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.executor == "process" and cfg.workers > 1 else None
    try:
        episodes_seen = 0
        update = 0
        next_eval = cfg.eval_every
        while episodes_seen < cfg.episodes:
            n_workers = min(cfg.workers, cfg.episodes - episodes_seen)
            jobs = [
                _WorkerJob(frozen, spec, actor, net_cfg, qoe_cfg, qcfg, cfg.seed, w, update, cfg.buffer_dynamics)
                for w in range(n_workers)
            ]
            episodes = _collect(jobs, pool)
            beta = cfg.entropy_weight(episodes_seen)
            actor, critic, stats = _update(actor, critic, episodes, net_cfg, cfg, beta, actor_opt, critic_opt,
                                           np.random.default_rng([cfg.seed, 1 << 20, update]))
            episodes_seen += n_workers
            update += 1
            result.episode_rewards.extend(float(ep.rewards.mean()) for ep in episodes)
            row = {"update": update, "episodes_seen": episodes_seen, **stats}
            result.rows.append(row)
            if not all(math.isfinite(row[c]) for c in ("actor_obj", "critic_loss")):
                raise TrainingDiverged(f"non-finite loss at update {update}: {row}")
            if val and episodes_seen >= next_eval:
                score = evaluate(val, Checkpoint(actor, critic, net_cfg, cfg), spec, qoe_cfg, qcfg,
                                 buffer_dynamics=cfg.buffer_dynamics).summary.mean_qoe
                result.validation.append((episodes_seen, score))
                log.info("episodes=%d validation mean QoE %.4f", episodes_seen, score)
                next_eval += cfg.eval_every
            if checkpoint_path and cfg.checkpoint_every and update % cfg.checkpoint_every == 0:
                Checkpoint(actor, critic, net_cfg, cfg).save(checkpoint_path)
    finally:
        if pool is not None:
            pool.shutdown()

    result.checkpoint = Checkpoint(actor, critic, net_cfg, cfg)
    if checkpoint_path:
        result.checkpoint.save(checkpoint_path)
    return result


def _update(actor, critic, episodes: list[Episode], net_cfg, cfg: TrainConfig, beta, actor_opt, critic_opt, rng):
    states = np.concatenate([ep.states for ep in episodes])
    actions = np.concatenate([ep.actions for ep in episodes])
    values = nn.value_forward(states, critic, net_cfg)
    Q, td_targets = [], []
    offset = 0
    for ep in episodes:
        T = len(ep.rewards)
        v = values[offset : offset + T]
        if cfg.n_step is None:
            Q.append(n_step_targets(ep.rewards, 0.0, cfg.gamma))
        else:
            Q.append(truncated_targets(ep.rewards, v, cfg.gamma, cfg.n_step))
        nxt = np.append(v[1:], 0.0)  # terminal: gamma-term dropped
        td_targets.append(ep.rewards + cfg.gamma * nxt)
        offset += T
    Q = np.concatenate(Q)
    td_targets = np.concatenate(td_targets)
    adv = advantage(Q, values)
    if cfg.advantage_norm and adv.size > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    if cfg.update_mode == "episode":
        slices = [slice(0, len(actions))]
    else:
        # One minibatch per chunk position across workers.
        T = len(episodes[0].rewards)
        idx = np.arange(len(actions)).reshape(len(episodes), T)
        slices = [idx[:, t] for t in range(T)]

    a_val = c_val = ent = 0.0
    for sl in slices:
        a_res = actor_objective(states[sl], actions[sl], adv[sl], actor, net_cfg, beta, rng)
        c_res = critic_objective(states[sl], td_targets[sl], critic, net_cfg, rng)
        actor = actor_opt.step(actor, a_res.grads, "ascent")
        critic = critic_opt.step(critic, c_res.grads, "descent")
        a_val += a_res.value
        c_val += c_res.value
        ent += a_res.info["entropy"] * np.size(actions[sl])
    stats = {
        "mean_reward": float(np.mean([ep.rewards.mean() for ep in episodes])),
        "mean_entropy": ent / len(actions),
        "actor_obj": a_val,
        "critic_loss": c_val,
    }
    return actor, critic, stats


# ----------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalResult:
    logs: list[EpisodeLog]
    summaries: list[EpisodeSummary]
    summary: EpisodeSummary  # pooled over every chunk of every episode


def evaluate(
    traces: Sequence[Trace],
    checkpoint: Checkpoint,
    spec: VideoSpec,
    qoe_cfg: QoEConfig = QoEConfig(),
    qcfg: QuantizerConfig = QuantizerConfig(),
    offsets: Sequence[float] | None = None,
    buffer_dynamics: bool = True,
) -> EvalResult:
    """Greedy (argmax, lowest-index tie-break) evaluation; never mutates ``checkpoint``."""
    checkpoint.check()
    if checkpoint.net_cfg.num_actions != len(spec.ladder):
        raise ValueError("checkpoint action count does not match the ladder")
    offsets = [0.0] * len(traces) if offsets is None else list(offsets)
    logs, sums, pooled = [], [], []
    for tr, t0 in zip(traces, offsets):
        ep = play(tr, spec, checkpoint.actor, checkpoint.net_cfg, qoe_cfg, qcfg, t0=t0,
                  buffer_dynamics=buffer_dynamics)
        b = score_episode(ep.log, spec.ladder, qoe_cfg)
        logs.append(ep.log)
        sums.append(summarize(b))
        pooled.extend(b)
    return EvalResult(logs, sums, summarize(pooled))


def agent_policy(checkpoint: Checkpoint, qcfg: QuantizerConfig = QuantizerConfig()):
    """Greedy policy callback usable with :func:`run_episode`."""

    def policy(obs: Observation) -> int:
        s = observation_state(obs, checkpoint.net_cfg, qcfg)
        return greedy_action(nn.policy_forward(s, checkpoint.actor, checkpoint.net_cfg))

    return policy


ABLATIONS = ("no_sensor", "raw_sensor", "conv_encoder", "window_2", "window_16")


def ablation_variants(kind: str, net_cfg: NetworkConfig, train_cfg: TrainConfig) -> tuple[NetworkConfig, TrainConfig]:
    if kind == "no_sensor":
        return replace(net_cfg, sensor_mode="none"), train_cfg
    if kind == "raw_sensor":
        return replace(net_cfg, sensor_mode="raw"), train_cfg
    if kind == "conv_encoder":
        return replace(net_cfg, encoder="conv", conv_kernel=4, conv_filters=net_cfg.lstm_hidden), train_cfg
    if kind == "window_2":
        return replace(net_cfg, throughput_window=2), train_cfg
    if kind == "window_16":
        return replace(net_cfg, throughput_window=16), train_cfg
    raise ValueError(f"unknown ablation {kind!r}; expected one of {', '.join(ABLATIONS)}")
