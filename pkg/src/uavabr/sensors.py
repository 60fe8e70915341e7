"""Flight-state sensor quantization and sliding-window threshold derivation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .traces import Trace, TraceSample

GRAVITY = 9.80665


@dataclass(frozen=True)
class QuantizerConfig:
    distance_threshold: float = 50.0
    velocity_thresholds: tuple[float, float] = (8.0, 12.0)
    accel_threshold: float = 18.0
    qoe_drop: float = 0.95
    window: int = 50
    # "raw": norm of the reading as logged; "gravity_removed": subtract g from z first.
    accel_mode: str = "raw"

    def __post_init__(self):
        lo, hi = self.velocity_thresholds
        if not 0 < lo < hi:
            raise ValueError("velocity_thresholds must be positive and strictly increasing")
        if self.distance_threshold <= 0 or self.accel_threshold <= 0 or self.qoe_drop <= 0:
            raise ValueError("thresholds must be positive")
        if self.window < 1:
            raise ValueError("window must be a positive sample count")
        if self.accel_mode not in ("raw", "gravity_removed"):
            raise ValueError(f"unknown accel_mode {self.accel_mode!r}")


class QuantizedSensors(NamedTuple):
    d_q: int
    v_q: int
    a_q: int


def accel_magnitude(accel: Sequence[float], mode: str = "raw") -> float:
    ax, ay, az = (float(a) for a in accel)
    if mode == "gravity_removed":
        az -= GRAVITY
    return math.sqrt(ax * ax + ay * ay + az * az)


def quantize(sample: TraceSample, cfg: QuantizerConfig = QuantizerConfig()) -> QuantizedSensors:
    lo, hi = cfg.velocity_thresholds
    v = sample.velocity
    if v < lo:
        v_q = 0
    elif v <= hi:
        v_q = 1
    else:
        v_q = 2
    return QuantizedSensors(
        int(sample.distance > cfg.distance_threshold),
        v_q,
        int(accel_magnitude(sample.accel, cfg.accel_mode) > cfg.accel_threshold),
    )


def derive_thresholds(pairs, cfg: QuantizerConfig = QuantizerConfig()) -> list[float]:
    """Quantization thresholds from (sensor_value, throughput) pairs.

    Pairs are sorted by sensor value and a ``cfg.window``-sample moving mean
    of throughput is swept upward. Whenever the mean has fallen by at least
    ``cfg.qoe_drop`` below the reference (initially the first window), the
    median sensor value of the current window is emitted and the reference
    resets to the current mean.
    """
    a = np.asarray(pairs, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (sensor_value, throughput)")
    w = cfg.window
    if a.shape[0] < 2 * w:
        raise ValueError(f"need at least {2 * w} pairs for window {w}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("pairs contain non-finite values")
    order = np.lexsort((a[:, 1], a[:, 0]))
    sensor = a[order, 0]
    thr = a[order, 1]
    csum = np.concatenate(([0.0], np.cumsum(thr)))
    means = (csum[w:] - csum[:-w]) / w

    thresholds: list[float] = []
    ref = means[0]
    for i in range(1, means.size):
        # Tolerance keeps exact multiples of qoe_drop from slipping by rounding.
        if ref - means[i] >= cfg.qoe_drop - 1e-9:
            value = float(np.median(sensor[i : i + w]))
            if not thresholds or value > thresholds[-1]:
                thresholds.append(value)
            ref = means[i]
    return thresholds


SENSOR_COLUMNS = ("distance", "velocity", "accel")


def sensor_pairs(traces: Sequence[Trace], sensor: str, cfg: QuantizerConfig = QuantizerConfig()) -> np.ndarray:
    """All (sensor_value, throughput) pairs of a corpus for one sensor."""
    if sensor not in SENSOR_COLUMNS:
        raise ValueError(f"unknown sensor {sensor!r}; valid names: {', '.join(SENSOR_COLUMNS)}")
    if not traces:
        raise ValueError("empty corpus")
    chunks = []
    for tr in traces:
        if sensor == "accel":
            acc = tr.accel.copy()
            if cfg.accel_mode == "gravity_removed":
                acc[:, 2] -= GRAVITY
            values = np.linalg.norm(acc, axis=1)
        else:
            values = getattr(tr, sensor)
        chunks.append(np.column_stack((values, tr.throughput)))
    return np.concatenate(chunks)
