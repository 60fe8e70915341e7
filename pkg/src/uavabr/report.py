"""Paired policy comparison on a fixed episode set, with plot-ready CSV output."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .playback import EpisodeLog, Policy, VideoSpec, run_episode
from .qoe import COMPONENTS, EpisodeSummary, QoEConfig, cdf_csv, score_episode, summarize, summary_csv
from .traces import Trace, atomic_write_text


def episode_offsets(traces: Sequence[Trace], seed: int, randomize: bool = True) -> list[float]:
    """One start offset per trace, shared by every policy under comparison."""
    if not randomize:
        return [0.0] * len(traces)
    rng = np.random.default_rng([seed, 0xC0FFEE])
    return [float(rng.uniform(0.0, tr.duration)) for tr in traces]


@dataclass
class PolicyResult:
    name: str
    logs: list[EpisodeLog]
    summary: EpisodeSummary  # pooled over all chunks
    episode_qoe: np.ndarray  # mean QoE per chunk, one entry per episode


@dataclass
class PairwiseStat:
    a: str
    b: str
    mean_diff: float
    diff_lo: float
    diff_hi: float
    rel_diff: float
    rel_lo: float
    rel_hi: float


@dataclass
class CompareReport:
    results: dict[str, PolicyResult]
    pairwise: list[PairwiseStat] = field(default_factory=list)

    def files(self) -> dict[str, str]:
        """Relative path -> CSV text for every report artifact."""
        out = {"summary.csv": summary_csv({k: r.summary for k, r in self.results.items()})}
        for name, r in self.results.items():
            for comp in COMPONENTS:
                out[f"cdf/{name}_{comp}.csv"] = cdf_csv(r.summary.per_chunk[comp])
            out[f"cdf/{name}_episode_qoe.csv"] = cdf_csv(r.episode_qoe)
        out["timeseries.csv"] = self.timeseries_csv()
        out["pairwise.csv"] = self.pairwise_csv()
        return out

    def timeseries_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", "trace", "t0", "chunk", "level", "bitrate_kbps", "buffer_s", "rebuf_s", "thru_mbps", "reward"])
        for name, r in self.results.items():
            for lg in r.logs:
                for rec in lg.records:
                    w.writerow([name, lg.trace_id, repr(lg.t0), rec.chunk, rec.level, repr(rec.bitrate_kbps),
                                repr(rec.buffer_s), repr(rec.rebuf_s), repr(rec.thru_mbps), repr(rec.reward)])
        return buf.getvalue()

    def pairwise_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy_a", "policy_b", "mean_diff", "diff_ci_lo", "diff_ci_hi", "rel_diff", "rel_ci_lo", "rel_ci_hi"])
        for p in self.pairwise:
            w.writerow([p.a, p.b] + [repr(float(v)) for v in (p.mean_diff, p.diff_lo, p.diff_hi, p.rel_diff, p.rel_lo, p.rel_hi)])
        return buf.getvalue()

    def write(self, out_dir: str | os.PathLike) -> None:
        out_dir = Path(out_dir)
        for rel, text in self.files().items():
            atomic_write_text(out_dir / rel, text)


def paired_bootstrap(a, b, n_resamples: int = 1000, seed: int = 0, level: float = 0.95) -> PairwiseStat:
    """Bootstrap CIs for mean(a) - mean(b) and its relative form over paired episodes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError("paired samples must be nonempty and of equal length")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, a.size, size=(n_resamples, a.size))
    ma, mb = a[idx].mean(axis=1), b[idx].mean(axis=1)
    diff = ma - mb
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = diff / np.abs(mb)
    q = [(1 - level) / 2 * 100, (1 + level) / 2 * 100]
    d_lo, d_hi = np.percentile(diff, q)
    r_lo, r_hi = np.nanpercentile(rel, q) if np.any(np.isfinite(rel)) else (np.nan, np.nan)
    mean_b = b.mean()
    rel_point = (a.mean() - mean_b) / abs(mean_b) if mean_b != 0 else np.nan
    return PairwiseStat("a", "b", float(a.mean() - mean_b), float(d_lo), float(d_hi), float(rel_point),
                        float(r_lo), float(r_hi))


def evaluate_policy(name: str, policy: Policy, traces: Sequence[Trace], offsets: Sequence[float], spec: VideoSpec,
                    qoe_cfg: QoEConfig, buffer_dynamics: bool = True) -> PolicyResult:
    logs, pooled, per_ep = [], [], []
    for tr, t0 in zip(traces, offsets):
        lg = run_episode(tr, spec, policy, t0=t0, buffer_dynamics=buffer_dynamics)
        b = score_episode(lg, spec.ladder, qoe_cfg)
        logs.append(lg)
        pooled.extend(b)
        per_ep.append(np.mean([x.total for x in b]))
    return PolicyResult(name, logs, summarize(pooled), np.array(per_ep))


def compare(
    traces: Sequence[Trace],
    policies: Mapping[str, Policy],
    spec: VideoSpec,
    qoe_cfg: QoEConfig = QoEConfig(),
    seed: int = 0,
    randomize_offsets: bool = True,
    n_resamples: int = 1000,
) -> CompareReport:
    """Evaluate every policy on the identical (trace, offset) episode set."""
    if not traces:
        raise ValueError("empty test corpus")
    if not policies:
        raise ValueError("no policies to compare")
    offsets = episode_offsets(traces, seed, randomize_offsets)
    results = {name: evaluate_policy(name, pol, traces, offsets, spec, qoe_cfg) for name, pol in policies.items()}
    names = list(results)
    pairs = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            st = paired_bootstrap(results[a].episode_qoe, results[b].episode_qoe, n_resamples, seed)
            st.a, st.b = a, b
            pairs.append(st)
    return CompareReport(results, pairs)
