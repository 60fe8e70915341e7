"""Throughput/sensor traces: representation, CSV I/O, corpus splitting and a
synthetic UAV flight generator."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

CSV_HEADER = ("t_s", "throughput_mbps", "distance_m", "velocity_mps", "ax_mps2", "ay_mps2", "az_mps2")

# Corpus-level sanity bound; exceeding it only warns.
MAX_EXPECTED_MBPS = 20.0


class TraceError(ValueError):
    """Raised for malformed traces or corpora."""


class TraceSample(NamedTuple):
    t: float
    throughput: float
    distance: float
    velocity: float
    accel: tuple[float, float, float]


class Trace:
    """Immutable time-indexed throughput trace with flight-state readings.

    Stored column-wise; ``samples`` gives the row view.
    """

    def __init__(
        self,
        id: str,
        t: Sequence[float],
        throughput: Sequence[float],
        distance: Sequence[float] | None = None,
        velocity: Sequence[float] | None = None,
        accel: Sequence[Sequence[float]] | None = None,
        duration: float | None = None,
    ):
        t_arr = np.asarray(t, dtype=float).reshape(-1)
        n = t_arr.size
        if n == 0:
            raise TraceError(f"trace {id!r}: empty trace")
        thr = np.asarray(throughput, dtype=float).reshape(-1)
        dist = np.zeros(n) if distance is None else np.asarray(distance, dtype=float).reshape(-1)
        vel = np.zeros(n) if velocity is None else np.asarray(velocity, dtype=float).reshape(-1)
        acc = np.zeros((n, 3)) if accel is None else np.asarray(accel, dtype=float).reshape(n, 3)
        for name, arr in (("throughput", thr), ("distance", dist), ("velocity", vel)):
            if arr.size != n:
                raise TraceError(f"trace {id!r}: {name} has {arr.size} entries, expected {n}")
        _validate_columns(id, t_arr, thr, dist, vel, acc)

        if duration is None:
            duration = _infer_duration(t_arr)
        if not duration >= t_arr[-1] or not duration > 0:
            raise TraceError(f"trace {id!r}: duration {duration} must be positive and >= last timestamp {t_arr[-1]}")

        self.id = str(id)
        self.duration = float(duration)
        self.t = t_arr
        self.throughput = thr
        self.distance = dist
        self.velocity = vel
        self.accel = acc
        for arr in (self.t, self.throughput, self.distance, self.velocity, self.accel):
            arr.setflags(write=False)

        # Segment k spans [edges[k], edges[k+1]) at throughput[k]; the first
        # sample also covers [0, t[0]).
        self._edges = np.concatenate(([0.0], t_arr[1:], [self.duration]))
        seg_bits = thr * 1e6 * np.diff(self._edges)
        self._cum_bits = np.concatenate(([0.0], np.cumsum(seg_bits)))

    @property
    def samples(self) -> list[TraceSample]:
        return [self.sample(i) for i in range(len(self))]

    def sample(self, i: int) -> TraceSample:
        return TraceSample(
            float(self.t[i]),
            float(self.throughput[i]),
            float(self.distance[i]),
            float(self.velocity[i]),
            tuple(float(a) for a in self.accel[i]),
        )

    def index_at(self, t: float) -> int:
        """Index of the sample in effect at time ``t`` (zero-order hold, wrapped)."""
        if t < 0:
            raise ValueError(f"time must be non-negative, got {t}")
        r = math.fmod(t, self.duration)
        return max(int(np.searchsorted(self.t, r, side="right")) - 1, 0)

    def sample_at(self, t: float) -> TraceSample:
        return self.sample(self.index_at(t))

    @property
    def bits_per_cycle(self) -> float:
        return float(self._cum_bits[-1])

    def cumulative_bits(self, t: float) -> float:
        """Bits deliverable over [0, t] following the wrapped hold signal."""
        cycles, r = divmod(t, self.duration)
        k = min(int(np.searchsorted(self._edges, r, side="right")) - 1, len(self) - 1)
        return cycles * self._cum_bits[-1] + self._cum_bits[k] + self.throughput[k] * 1e6 * (r - self._edges[k])

    def time_for_bits(self, bits: float) -> float:
        """Smallest t with ``cumulative_bits(t) == bits``."""
        total = self._cum_bits[-1]
        if total <= 0:
            raise TraceError(f"trace {self.id!r}: undeliverable chunk (throughput is zero everywhere)")
        if bits <= 0:
            return 0.0
        cycles, rem = divmod(bits, total)
        if rem == 0:
            cycles -= 1
            rem = total
        k = int(np.searchsorted(self._cum_bits, rem, side="left"))
        seg = k - 1
        return cycles * self.duration + self._edges[seg] + (rem - self._cum_bits[seg]) / (self.throughput[seg] * 1e6)

    def __len__(self) -> int:
        return self.t.size

    def __repr__(self) -> str:
        return f"Trace(id={self.id!r}, n={len(self)}, duration={self.duration:g})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.id == other.id
            and self.duration == other.duration
            and all(
                np.array_equal(a, b)
                for a, b in zip(
                    (self.t, self.throughput, self.distance, self.velocity, self.accel),
                    (other.t, other.throughput, other.distance, other.velocity, other.accel),
                )
            )
        )

    __hash__ = None  # type: ignore[assignment]


def _validate_columns(id, t, thr, dist, vel, acc) -> None:
    for name, arr in (("t", t), ("throughput", thr), ("distance", dist), ("velocity", vel), ("accel", acc)):
        if not np.all(np.isfinite(arr)):
            raise TraceError(f"trace {id!r}: non-finite {name}")
    if t[0] < 0:
        raise TraceError(f"trace {id!r}: row 1: negative timestamp")
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise TraceError(f"trace {id!r}: row {bad[0] + 2}: timestamps not strictly increasing")
    for name, arr in (("throughput", thr), ("distance", dist), ("velocity", vel)):
        neg = np.flatnonzero(arr < 0)
        if neg.size:
            raise TraceError(f"trace {id!r}: row {neg[0] + 1}: negative {name}")


def _infer_duration(t: np.ndarray) -> float:
    # The last sample holds for one more sampling period.
    step = float(t[-1] - t[-2]) if t.size > 1 else 1.0
    return float(t[-1] + step)


def throughput_at(trace: Trace, t: float) -> float:
    """Throughput (Mbps) in effect at time ``t``; wraps past the trace end."""
    return float(trace.throughput[trace.index_at(t)])


# ----------------------------------------------------------------------------
# CSV I/O


def read_trace(path: str | os.PathLike, id: str | None = None) -> Trace:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_trace(fh, id=id or path.stem, source=str(path))


def parse_trace(fh: Iterable[str], id: str, source: str = "<stream>") -> Trace:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise TraceError(f"{source}: empty trace")
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise TraceError(f"{source}: bad header {header!r}, expected {','.join(CSV_HEADER)}")
    rows = []
    for rowno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise TraceError(f"{source}: row {rowno}: expected {len(CSV_HEADER)} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise TraceError(f"{source}: row {rowno}: {exc}") from None
        if rows and vals[0] <= rows[-1][0]:
            raise TraceError(f"{source}: row {rowno}: timestamps not strictly increasing")
        if vals[1] < 0:
            raise TraceError(f"{source}: row {rowno}: negative throughput")
        rows.append(vals)
    if not rows:
        raise TraceError(f"{source}: empty trace")
    a = np.array(rows)
    return Trace(id, a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4:7])


def format_trace(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(len(trace)):
        w.writerow(
            [repr(float(trace.t[i])), repr(float(trace.throughput[i])), repr(float(trace.distance[i])),
             repr(float(trace.velocity[i]))] + [repr(float(a)) for a in trace.accel[i]]
        )
    return buf.getvalue()


def write_trace(trace: Trace, path: str | os.PathLike) -> None:
    atomic_write_text(path, format_trace(trace))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ----------------------------------------------------------------------------
# Corpus


@dataclass(frozen=True)
class TraceCorpus:
    traces: tuple[Trace, ...]
    split_seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        if not 0 < self.train_fraction <= 1:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")

    def __len__(self) -> int:
        return len(self.traces)


def load_corpus(path: str | os.PathLike, split_seed: int = 0, train_fraction: float = 0.8) -> TraceCorpus:
    """Load one CSV trace, or every ``*.csv`` in a directory (sorted by name)."""
    path = Path(path)
    if not path.exists():
        raise TraceError(f"{path}: no such file or directory")
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise TraceError(f"{path}: no traces found")
    traces = tuple(read_trace(f) for f in files)
    peak = max(float(tr.throughput.max()) for tr in traces)
    if peak > MAX_EXPECTED_MBPS:
        warnings.warn(f"{path}: peak throughput {peak:.2f} Mbps exceeds the expected {MAX_EXPECTED_MBPS} Mbps range")
    return TraceCorpus(traces, split_seed=split_seed, train_fraction=train_fraction)


def split(corpus: TraceCorpus) -> tuple[list[Trace], list[Trace]]:
    """Seeded random train/test partition; |train| = round(fraction * N)."""
    n = len(corpus)
    if n == 0:
        raise TraceError("cannot split an empty corpus")
    n_train = int(math.floor(corpus.train_fraction * n + 0.5))
    if n_train == 0:
        raise TraceError("empty training set")
    if n_train == n:
        raise TraceError("empty test set")
    order = np.random.default_rng(corpus.split_seed).permutation(n)
    train = [corpus.traces[i] for i in sorted(order[:n_train])]
    test = [corpus.traces[i] for i in sorted(order[n_train:])]
    return train, test


# ----------------------------------------------------------------------------
# Synthetic flights


def _profile(points: Sequence[tuple[float, float]], x: np.ndarray) -> np.ndarray:
    xs, ys = zip(*points)
    return np.interp(x, xs, ys)


@dataclass(frozen=True)
class SynthParams:
    """Parameters of the synthetic flight/throughput generator.

    ``distance_profile``, ``velocity_profile`` and ``accel_profile`` are
    (x, gain) knots of non-increasing piecewise-linear gain curves; beyond
    the last knot the gain stays constant. The acceleration gain applies to
    the true (vibration-free) peak planar acceleration.
    """

    duration: float = 100.0
    sample_period: float = 1.0
    base_rate: float = 4.0
    distance_profile: tuple[tuple[float, float], ...] = ((0.0, 1.0), (50.0, 1.0), (60.0, 0.55), (120.0, 0.3))
    velocity_profile: tuple[tuple[float, float], ...] = ((0.0, 1.0), (8.0, 0.85), (12.0, 0.5), (16.0, 0.3))
    accel_profile: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    noise_sigma: float = 0.15
    # Flight path.
    path: str = "waypoint"  # "waypoint" | "orbit"
    altitude: float = 25.0
    radius_max: float = 110.0
    speed_range: tuple[float, float] = (0.0, 19.5)
    accel_range: tuple[float, float] = (3.0, 24.0)
    orbit_radius: float = 40.0
    orbit_speed: float = 0.0
    leg_duration: tuple[float, float] = (4.0, 15.0)
    vibration_sigma: float = 1.5
    include_gravity: bool = False
    trace_scale: float = 1.0
    substeps: int = 10

    def __post_init__(self):
        if self.duration <= 0 or self.sample_period <= 0 or self.sample_period > self.duration:
            raise ValueError("duration and sample_period must be positive with sample_period <= duration")
        if self.base_rate < 0 or self.trace_scale < 0 or self.noise_sigma < 0 or self.vibration_sigma < 0:
            raise ValueError("rates, scales and noise levels must be non-negative")
        if self.path not in ("waypoint", "orbit"):
            raise ValueError(f"unknown path kind {self.path!r}")
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise ValueError("speed_range must satisfy 0 <= lo <= hi")
        alo, ahi = self.accel_range
        if not 0 < alo <= ahi:
            raise ValueError("accel_range must satisfy 0 < lo <= hi")
        llo, lhi = self.leg_duration
        if not 0 < llo <= lhi:
            raise ValueError("leg_duration must satisfy 0 < lo <= hi")
        if self.substeps < 1 or self.altitude < 0 or self.radius_max <= 0 or self.orbit_radius < 0:
            raise ValueError("invalid geometry parameters")
        for name in ("distance_profile", "velocity_profile", "accel_profile"):
            pts = getattr(self, name)
            xs = [p[0] for p in pts]
            gs = [p[1] for p in pts]
            if len(pts) < 1 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError(f"{name}: knots must be strictly increasing")
            if any(g < 0 for g in gs) or any(b > a for a, b in zip(gs, gs[1:])):
                raise ValueError(f"{name}: gains must be non-negative and non-increasing")

    def distance_gain(self, d):
        return _profile(self.distance_profile, np.asarray(d, dtype=float))

    def velocity_gain(self, v):
        return _profile(self.velocity_profile, np.asarray(v, dtype=float))

    def accel_gain(self, a):
        return _profile(self.accel_profile, np.asarray(a, dtype=float))


# Throughput steps down exactly at the default quantizer boundaries (50 m,
# 8 and 12 m/s, 18 m/s^2), with short legs so the flight state changes often.
SENSOR_COUPLED = SynthParams(
    base_rate=6.0,
    noise_sigma=0.1,
    leg_duration=(3.0, 8.0),
    distance_profile=((0.0, 1.0), (50.0, 1.0), (50.001, 0.7)),
    velocity_profile=((0.0, 1.0), (8.0, 1.0), (8.001, 0.6), (12.0, 0.6), (12.001, 0.3)),
    accel_profile=((0.0, 1.0), (18.0, 1.0), (18.001, 0.4)),
)


def _fly_waypoints(p: SynthParams, rng: np.random.Generator, n_fine: int, dt: float):
    pos = np.empty((n_fine, 2))
    vel = np.empty((n_fine, 2))
    x = rng.uniform(-1, 1, 2) * p.radius_max / math.sqrt(2)
    v = np.zeros(2)
    target = x.copy()
    target_speed = 0.0
    accel_lim = p.accel_range[0]
    leg_left = 0.0
    for k in range(n_fine):
        if leg_left <= 0:
            r = p.radius_max * math.sqrt(rng.uniform())
            phi = rng.uniform(0, 2 * math.pi)
            target = np.array([r * math.cos(phi), r * math.sin(phi)])
            target_speed = rng.uniform(*p.speed_range)
            accel_lim = rng.uniform(*p.accel_range)
            leg_left = rng.uniform(*p.leg_duration)
        to_target = target - x
        dist = float(np.hypot(*to_target))
        if dist < 1e-9:
            desired = np.zeros(2)
        else:
            # Slow down near the waypoint so the path stays smooth.
            speed = min(target_speed, math.sqrt(2 * accel_lim * dist))
            desired = to_target / dist * speed
        dv = desired - v
        dv_norm = float(np.hypot(*dv))
        max_dv = accel_lim * dt
        if dv_norm > max_dv:
            dv *= max_dv / dv_norm
        v = v + dv
        x = x + v * dt
        pos[k] = x
        vel[k] = v
        leg_left -= dt
    return pos, vel


def _fly_orbit(p: SynthParams, rng: np.random.Generator, n_fine: int, dt: float):
    phase = rng.uniform(0, 2 * math.pi)
    tt = np.arange(n_fine) * dt
    omega = p.orbit_speed / p.orbit_radius if p.orbit_radius > 0 else 0.0
    ang = phase + omega * tt
    pos = p.orbit_radius * np.column_stack((np.cos(ang), np.sin(ang)))
    vel = p.orbit_speed * np.column_stack((-np.sin(ang), np.cos(ang)))
    return pos, vel


def synthesize(params: SynthParams, seed: int, id: str | None = None) -> Trace:
    """Generate one synthetic flight trace; deterministic given ``seed``.

    Throughput is ``base_rate * g_d(distance) * g_v(velocity) * g_a(accel) * noise``
    with mean-one lognormal noise, scaled by ``trace_scale``.
    """
    p = params
    rng = np.random.default_rng(seed)
    n = int(math.floor(p.duration / p.sample_period + 1e-9))
    dt = p.sample_period / p.substeps
    n_fine = n * p.substeps + 1
    fly = _fly_orbit if p.path == "orbit" else _fly_waypoints
    pos, vel = fly(p, rng, n_fine, dt)
    acc = np.zeros_like(vel)
    acc[1:] = np.diff(vel, axis=0) / dt

    idx = np.arange(n) * p.substeps
    t = idx * dt
    horiz = pos[idx]
    distance = np.sqrt(np.sum(horiz**2, axis=1) + p.altitude**2)
    velocity = np.hypot(vel[idx, 0], vel[idx, 1])
    # IMU reading: peak planar acceleration over the preceding sample period.
    accel = np.zeros((n, 3))
    for j, k in enumerate(idx):
        lo = max(k - p.substeps + 1, 0)
        window = acc[lo : k + 1]
        mags = np.hypot(window[:, 0], window[:, 1])
        accel[j, :2] = window[int(np.argmax(mags))]
    accel_true = np.hypot(accel[:, 0], accel[:, 1])
    accel += rng.normal(0.0, p.vibration_sigma, size=accel.shape) if p.vibration_sigma > 0 else 0.0
    if p.include_gravity:
        accel[:, 2] += 9.80665

    if p.noise_sigma > 0:
        noise = np.exp(rng.normal(-0.5 * p.noise_sigma**2, p.noise_sigma, size=n))
    else:
        noise = np.ones(n)
    gain = p.distance_gain(distance) * p.velocity_gain(velocity) * p.accel_gain(accel_true)
    throughput = p.trace_scale * p.base_rate * gain * noise
    return Trace(
        id if id is not None else f"synth-{seed}",
        t,
        throughput,
        distance,
        velocity,
        accel,
        duration=p.duration,
    )


def synthesize_corpus(params: SynthParams, count: int, seed: int, split_seed: int | None = None,
                      train_fraction: float = 0.8) -> TraceCorpus:
    if count <= 0:
        raise ValueError("count must be positive")
    seeds = np.random.SeedSequence(seed).generate_state(count)
    traces = tuple(synthesize(params, int(s), id=f"trace_{i:04d}") for i, s in enumerate(seeds))
    return TraceCorpus(traces, split_seed=seed if split_seed is None else split_seed, train_fraction=train_fraction)
