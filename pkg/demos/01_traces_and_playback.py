"""
Flight traces and chunk playback
================================

Synthesize one flight, look at how the link reacts to distance and speed,
then stream the same video over it at each fixed bitrate.
"""

import numpy as np

from uavabr import VideoSpec, run_episode, synthesize, SynthParams, quantize
from uavabr.baselines import fixed_policy

# A waypoint flight: straight legs at random speeds, with hard turns between them.
params = SynthParams(duration=100.0)
trace = synthesize(params, seed=7, id="demo")
print(f"trace {trace.id}: {len(trace)} samples over {trace.duration:.0f} s")
print(f"  throughput  mean {trace.throughput.mean():.2f} Mbps, min {trace.throughput.min():.2f}, max {trace.throughput.max():.2f}")
print(f"  distance    {trace.distance.min():.0f}..{trace.distance.max():.0f} m")
print(f"  velocity    {trace.velocity.min():.1f}..{trace.velocity.max():.1f} m/s")

# The quantized sensor view the agent sees at each request.
print("\nfirst ten samples, quantized (d_q, v_q, a_q):")
for i in range(10):
    s = trace.sample(i)
    q = quantize(s)
    print(f"  t={s.t:4.0f}  {s.throughput:5.2f} Mbps  d={s.distance:5.1f}  v={s.velocity:5.1f}  ->  {tuple(q)}")

# Throughput drops with speed: bin the samples by velocity band.
bands = np.digitize(trace.velocity, [8.0, 12.0])
for b, label in enumerate(["v < 8", "8 <= v <= 12", "v > 12"]):
    sel = bands == b
    if sel.any():
        print(f"  {label:13s} mean throughput {trace.throughput[sel].mean():.2f} Mbps over {sel.sum()} samples")

# Stream 41 two-second chunks at each rung.
spec = VideoSpec()
print("\nfixed-bitrate playback:")
for level, kbps in enumerate(spec.ladder):
    log = run_episode(trace, spec, fixed_policy(level), t0=0.0)
    stall = sum(r.rebuf_s for r in log)
    clamps = sum(r.violation for r in log)
    print(f"  {kbps:6.0f} Kbps: total stall {stall:5.1f} s, buffer clamps {clamps:2d}, final buffer {log.records[-1].buffer_s:5.2f} s")

# Buffer trajectory at the 1850 Kbps rung, chunk by chunk.
log = run_episode(trace, spec, fixed_policy(2))
print("\nbuffer after each chunk at 1850 Kbps:")
print("  " + " ".join(f"{r.buffer_s:.1f}" for r in log.records))
