"""Per-chunk QoE reward (log utility, rebuffering and smoothness penalties)
and episode-level aggregates."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .playback import EpisodeLog


@dataclass(frozen=True)
class QoEConfig:
    mu: float = 2.26
    l_min: float = 300.0
    violation_penalty: float = 5.0
    ladder: tuple[float, ...] | None = (300.0, 750.0, 1850.0, 2850.0)

    def __post_init__(self):
        if self.mu <= 0 or self.l_min <= 0 or self.violation_penalty < 0:
            raise ValueError("need mu > 0, l_min > 0 and violation_penalty >= 0")
        if self.ladder is not None:
            object.__setattr__(self, "ladder", tuple(float(b) for b in self.ladder))


@dataclass(frozen=True)
class QoEBreakdown:
    utility: float
    rebuffer_penalty: float
    smoothness_penalty: float
    violation: float

    @property
    def total(self) -> float:
        return self.utility - self.rebuffer_penalty - self.smoothness_penalty - self.violation


COMPONENTS = ("total", "utility", "rebuffer_penalty", "smoothness_penalty", "violation")


def utility_log(l: float, l_min: float) -> float:
    """Natural-log bitrate utility ln(l / l_min)."""
    if not 0 < l_min <= l:
        raise ValueError(f"need l >= l_min > 0, got l={l}, l_min={l_min}")
    return math.log(l / l_min)


def chunk_qoe(l_t: float, l_prev: float, T_t: float, violated: bool, cfg: QoEConfig = QoEConfig()) -> QoEBreakdown:
    if cfg.ladder is not None:
        for name, l in (("l_t", l_t), ("l_prev", l_prev)):
            if float(l) not in cfg.ladder:
                raise ValueError(f"{name}={l} is not on the ladder {cfg.ladder}")
    if T_t < 0:
        raise ValueError("rebuffer time must be non-negative")
    q_t = utility_log(l_t, cfg.l_min)
    q_prev = utility_log(l_prev, cfg.l_min)
    return QoEBreakdown(
        utility=q_t,
        rebuffer_penalty=cfg.mu * T_t,
        smoothness_penalty=abs(q_t - q_prev),
        violation=cfg.violation_penalty if violated else 0.0,
    )


def score_episode(log: EpisodeLog, ladder: Sequence[float], cfg: QoEConfig = QoEConfig()) -> list[QoEBreakdown]:
    """Fill ``reward`` on every record and return the per-chunk breakdowns."""
    out = []
    for rec in log.records:
        b = chunk_qoe(rec.bitrate_kbps, ladder[rec.prev_level], rec.rebuf_s, rec.violation, cfg)
        rec.reward = b.total
        out.append(b)
    return out


@dataclass
class EpisodeSummary:
    mean_qoe: float
    mean_utility: float
    mean_rebuf_pen: float
    mean_smooth_pen: float
    mean_violation: float
    per_chunk: dict[str, np.ndarray]  # component name -> per-chunk values

    def row(self) -> dict[str, float]:
        return {
            "mean_qoe": self.mean_qoe,
            "mean_utility": self.mean_utility,
            "mean_rebuf_pen": self.mean_rebuf_pen,
            "mean_smooth_pen": self.mean_smooth_pen,
            "mean_violation": self.mean_violation,
        }


def summarize(breakdowns: Sequence[QoEBreakdown]) -> EpisodeSummary:
    if not breakdowns:
        raise ValueError("empty episode log")
    comp = {
        "utility": np.array([b.utility for b in breakdowns]),
        "rebuffer_penalty": np.array([b.rebuffer_penalty for b in breakdowns]),
        "smoothness_penalty": np.array([b.smoothness_penalty for b in breakdowns]),
        "violation": np.array([b.violation for b in breakdowns]),
    }
    comp["total"] = np.array([b.total for b in breakdowns])
    return EpisodeSummary(
        mean_qoe=float(comp["total"].mean()),
        mean_utility=float(comp["utility"].mean()),
        mean_rebuf_pen=float(comp["rebuffer_penalty"].mean()),
        mean_smooth_pen=float(comp["smoothness_penalty"].mean()),
        mean_violation=float(comp["violation"].mean()),
        per_chunk=comp,
    )


def episode_summary(log: EpisodeLog, cfg: QoEConfig = QoEConfig(), ladder: Sequence[float] | None = None) -> EpisodeSummary:
    if not len(log):
        raise ValueError("empty episode log")
    ladder = ladder or cfg.ladder
    if ladder is None:
        raise ValueError("a ladder is needed to resolve previous levels")
    return summarize(score_episode(log, ladder, cfg))


def cdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF points (sorted value, cumulative probability)."""
    v = np.sort(np.asarray(values, dtype=float))
    return v, np.arange(1, v.size + 1) / v.size


SUMMARY_COLUMNS = ("policy", "mean_qoe", "mean_utility", "mean_rebuf_pen", "mean_smooth_pen", "mean_violation")


def summary_csv(rows: dict[str, EpisodeSummary]) -> str:
    buf = io.StringIO()
    buf.write(",".join(SUMMARY_COLUMNS) + "\n")
    for name, s in rows.items():
        r = s.row()
        buf.write(",".join([name] + [repr(r[c]) for c in SUMMARY_COLUMNS[1:]]) + "\n")
    return buf.getvalue()


def cdf_csv(values) -> str:
    x, p = cdf(values)
    return "value,cum_prob\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(x.tolist(), p.tolist()))
