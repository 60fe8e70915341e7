"""Chunk-level video player emulation over a throughput trace."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

from .traces import Trace, TraceError, TraceSample

MAX_BUFFER_S = 20.0
MAX_REBUFFER_S = 20.0
RETRY_GRANULARITY_S = 0.5


@dataclass(frozen=True)
class VideoSpec:
    ladder: tuple[float, ...] = (300.0, 750.0, 1850.0, 2850.0)
    chunk_duration: float = 2.0
    num_chunks: int = 41

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(float(b) for b in self.ladder))
        if not self.ladder or any(b <= 0 for b in self.ladder):
            raise ValueError("ladder bitrates must be positive")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError("ladder must be strictly ascending")
        if self.chunk_duration <= 0:
            raise ValueError("chunk_duration must be positive")
        if self.num_chunks < 1:
            raise ValueError("num_chunks must be a positive integer")


@dataclass(frozen=True)
class PlaybackState:
    buffer_s: float = 0.0
    last_level: int = 0
    chunk_index: int = 0
    wall_clock: float = 0.0


@dataclass(frozen=True)
class StepOutcome:
    download_time: float
    rebuffer_time: float
    next_state: PlaybackState
    boundary_violation: bool
    measured_throughput: float


def chunk_size_bits(spec: VideoSpec, level: int) -> float:
    if not 0 <= level < len(spec.ladder):
        raise IndexError(f"level {level} out of range for a {len(spec.ladder)}-rung ladder")
    return spec.ladder[level] * spec.chunk_duration * 1000.0


def download_time(trace: Trace, t_start: float, bits: float) -> float:
    """Seconds needed to pull ``bits`` starting at ``t_start`` (wrapping trace)."""
    if not bits > 0:
        raise ValueError("bits must be positive")
    if trace.bits_per_cycle <= 0:
        raise TraceError(f"trace {trace.id!r}: undeliverable chunk (throughput is zero everywhere)")
    start = trace.cumulative_bits(t_start)
    return trace.time_for_bits(start + bits) - t_start


def step(
    state: PlaybackState,
    level: int,
    trace: Trace,
    spec: VideoSpec,
    buffer_dynamics: bool = True,
) -> StepOutcome:
    """Download one chunk at ``level`` and update the buffer.

    With ``buffer_dynamics=False`` the buffer is frozen and no stall or
    boundary event can occur (degenerate bandit setting).
    """
    if state.chunk_index >= spec.num_chunks:
        raise ValueError("episode already finished")
    bits = chunk_size_bits(spec, level)
    f = download_time(trace, state.wall_clock, bits)
    b = state.buffer_s
    idle = 0.0
    violation = False
    if not buffer_dynamics:
        rebuf = 0.0
        b_next = b
    elif b >= f:
        rebuf = 0.0
        b_next = b + spec.chunk_duration - f
    else:
        rebuf = math.ceil((f - b) / RETRY_GRANULARITY_S) * RETRY_GRANULARITY_S
        b_next = spec.chunk_duration
    if b_next > MAX_BUFFER_S:
        idle = b_next - MAX_BUFFER_S
        b_next = MAX_BUFFER_S
        violation = True
    if rebuf > MAX_REBUFFER_S:
        violation = True
    nxt = PlaybackState(
        buffer_s=b_next,
        last_level=level,
        chunk_index=state.chunk_index + 1,
        wall_clock=state.wall_clock + f + idle,
    )
    return StepOutcome(f, rebuf, nxt, violation, bits / f / 1e6)


@dataclass(frozen=True)
class Observation:
    """What a policy sees before choosing the next chunk."""

    state: PlaybackState
    history: tuple[float, ...]  # measured Mbps of all past chunks, oldest first
    sensors: TraceSample  # flight-state reading at request time
    spec: VideoSpec

    @property
    def chunks_remaining(self) -> int:
        return self.spec.num_chunks - self.state.chunk_index


@dataclass
class ChunkRecord:
    chunk: int
    level: int
    bitrate_kbps: float
    f_s: float
    rebuf_s: float
    buffer_s: float  # buffer after the download
    thru_mbps: float
    violation: bool = False
    prev_level: int = 0
    reward: float | None = None

    def to_json(self) -> dict:
        return {
            "chunk": self.chunk,
            "level": self.level,
            "bitrate_kbps": self.bitrate_kbps,
            "f_s": self.f_s,
            "rebuf_s": self.rebuf_s,
            "buffer_s": self.buffer_s,
            "thru_mbps": self.thru_mbps,
            "reward": self.reward,
        }


@dataclass
class EpisodeLog:
    trace_id: str
    t0: float
    records: list[ChunkRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json()) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str, trace_id: str = "", t0: float = 0.0) -> "EpisodeLog":
        recs = []
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                recs.append(ChunkRecord(d["chunk"], d["level"], d["bitrate_kbps"], d["f_s"], d["rebuf_s"],
                                        d["buffer_s"], d["thru_mbps"], reward=d["reward"]))
        return cls(trace_id, t0, recs)


Policy = Callable[[Observation], int]


def run_episode(
    trace: Trace,
    spec: VideoSpec,
    policy: Policy,
    t0: float = 0.0,
    buffer_dynamics: bool = True,
    initial_buffer: float = 0.0,
) -> EpisodeLog:
    """Play the whole video once. Rewards are left empty for the caller."""
    state = PlaybackState(buffer_s=initial_buffer, last_level=0, chunk_index=0, wall_clock=t0)
    history: list[float] = []
    log = EpisodeLog(trace.id, t0)
    for _ in range(spec.num_chunks):
        obs = Observation(state, tuple(history), trace.sample_at(state.wall_clock), spec)
        level = int(policy(obs))
        out = step(state, level, trace, spec, buffer_dynamics=buffer_dynamics)
        log.records.append(
            ChunkRecord(
                chunk=state.chunk_index,
                level=level,
                bitrate_kbps=spec.ladder[level],
                f_s=out.download_time,
                rebuf_s=out.rebuffer_time,
                buffer_s=out.next_state.buffer_s,
                thru_mbps=out.measured_throughput,
                violation=out.boundary_violation,
                prev_level=state.last_level,
            )
        )
        history.append(out.measured_throughput)
        state = out.next_state
    return log
