"""Rule-based comparison policies: fixed, buffer-based, rate-based and MPC."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .playback import MAX_BUFFER_S, MAX_REBUFFER_S, RETRY_GRANULARITY_S, Observation, PlaybackState, VideoSpec
from .qoe import QoEConfig

THROUGHPUT_FLOOR_MBPS = 0.01


@dataclass(frozen=True)
class BaselineConfig:
    reservoir: float = 5.0
    cushion_top: float = 15.0
    rb_window: int = 5
    mpc_horizon: int = 5

    def __post_init__(self):
        if not 0 < self.reservoir < self.cushion_top:
            raise ValueError("need 0 < reservoir < cushion_top")
        if self.rb_window < 1 or self.mpc_horizon < 1:
            raise ValueError("rb_window and mpc_horizon must be >= 1")


def fixed_policy(level: int, spec: VideoSpec = VideoSpec()):
    if not 0 <= level < len(spec.ladder):
        raise ValueError(f"level {level} is not on the {len(spec.ladder)}-rung ladder")

    def policy(obs: Observation) -> int:
        return level

    return policy


def buffer_based(buffer_s: float, cfg: BaselineConfig, ladder: Sequence[float]) -> int:
    """Lowest rung below the reservoir, highest above the cushion, linear between."""
    K = len(ladder)
    if buffer_s < cfg.reservoir:
        return 0
    if buffer_s > cfg.cushion_top:
        return K - 1
    frac = (buffer_s - cfg.reservoir) / (cfg.cushion_top - cfg.reservoir)
    return min(int(math.floor(frac * (K - 1))), K - 1)


def harmonic_mean(history: Sequence[float]) -> float:
    x = np.asarray(history, dtype=float)
    if x.size == 0:
        raise ValueError("empty throughput history")
    x = np.maximum(x, THROUGHPUT_FLOOR_MBPS)
    return float(x.size / np.sum(1.0 / x))


def rate_based(history: Sequence[float], ladder: Sequence[float]) -> int:
    """Highest rung whose bitrate does not exceed the harmonic-mean estimate."""
    est_kbps = harmonic_mean(history) * 1000.0
    level = 0
    for k, b in enumerate(ladder):
        if b <= est_kbps:
            level = k
    return level


@lru_cache(maxsize=None)
def _sequences(K: int, h: int) -> np.ndarray:
    # Lexicographic order: argmax picks the lowest first level among ties.
    return np.array(list(itertools.product(range(K), repeat=h)), dtype=int).reshape(-1, h)


def mpc(state: PlaybackState, history: Sequence[float], spec: VideoSpec, cfg: BaselineConfig,
        qoe_cfg: QoEConfig = QoEConfig()) -> int:
    """First level of the QoE-maximizing sequence under a constant-rate forecast."""
    remaining = spec.num_chunks - state.chunk_index
    h = max(1, min(cfg.mpc_horizon, remaining))
    rate = harmonic_mean(history) if len(history) else THROUGHPUT_FLOOR_MBPS
    ladder = np.asarray(spec.ladder)
    q = np.log(ladder / qoe_cfg.l_min)
    seqs = _sequences(len(ladder), h)
    n = seqs.shape[0]
    buf = np.full(n, float(state.buffer_s))
    prev = np.full(n, q[state.last_level])
    total = np.zeros(n)
    for j in range(h):
        lv = seqs[:, j]
        f = ladder[lv] * spec.chunk_duration * 1000.0 / (rate * 1e6)
        stall = buf < f
        rebuf = np.where(stall, np.ceil((f - buf) / RETRY_GRANULARITY_S) * RETRY_GRANULARITY_S, 0.0)
        buf = np.where(stall, spec.chunk_duration, buf + spec.chunk_duration - f)
        violated = (buf > MAX_BUFFER_S) | (rebuf > MAX_REBUFFER_S)
        buf = np.minimum(buf, MAX_BUFFER_S)
        qt = q[lv]
        total += qt - qoe_cfg.mu * rebuf - np.abs(qt - prev) - np.where(violated, qoe_cfg.violation_penalty, 0.0)
        prev = qt
    return int(seqs[int(np.argmax(total)), 0])


# Policy callbacks for run_episode.


def buffer_based_policy(cfg: BaselineConfig = BaselineConfig()):
    def policy(obs: Observation) -> int:
        return buffer_based(obs.state.buffer_s, cfg, obs.spec.ladder)

    return policy


def rate_based_policy(cfg: BaselineConfig = BaselineConfig()):
    def policy(obs: Observation) -> int:
        if not obs.history:
            return 0
        return rate_based(obs.history[-cfg.rb_window :], obs.spec.ladder)

    return policy


def mpc_policy(cfg: BaselineConfig = BaselineConfig(), qoe_cfg: QoEConfig = QoEConfig()):
    def policy(obs: Observation) -> int:
        if not obs.history:
            return 0
        return mpc(obs.state, obs.history[-cfg.rb_window :], obs.spec, cfg, qoe_cfg)

    return policy


BASELINES = ("fixed0", "fixed1", "fixed2", "fixed3", "buffer_based", "rate_based", "mpc")


def make_baseline(name: str, spec: VideoSpec = VideoSpec(), cfg: BaselineConfig = BaselineConfig(),
                  qoe_cfg: QoEConfig = QoEConfig()):
    if name.startswith("fixed"):
        try:
            level = int(name[5:])
        except ValueError:
            raise ValueError(f"unknown policy {name!r}") from None
        return fixed_policy(level, spec)
    if name == "buffer_based":
        return buffer_based_policy(cfg)
    if name == "rate_based":
        return rate_based_policy(cfg)
    if name == "mpc":
        return mpc_policy(cfg, qoe_cfg)
    raise ValueError(f"unknown policy {name!r}; baselines: {', '.join(BASELINES)}")
