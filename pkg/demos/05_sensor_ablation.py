"""
Does the agent use its flight sensors?
======================================

On the sensor-coupled corpus the link steps down exactly when the drone
crosses 50 m, 8 or 12 m/s, or 18 m/s^2. The threshold sweep should find
those steps, and an agent that sees the quantized sensors should stream
at least as well as one trained blind. The first argument sets the
training budget per agent.
"""

import sys

from uavabr import SENSOR_COUPLED, NetworkConfig, TrainConfig, VideoSpec, evaluate, split, synthesize_corpus, train
from uavabr.report import episode_offsets, paired_bootstrap
from uavabr.sensors import QuantizerConfig, derive_thresholds, sensor_pairs

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
spec = VideoSpec()
corpus = synthesize_corpus(SENSOR_COUPLED, count=200, seed=1)
train_set, test_set = split(corpus)

# Threshold recovery from (sensor, throughput) pairs.
for sensor in ("distance", "velocity", "accel"):
    found = derive_thresholds(sensor_pairs(train_set, sensor), QuantizerConfig())
    print(f"{sensor:9s} thresholds: {[round(x, 2) for x in found]}")

cfg = TrainConfig(episodes=episodes, optimizer="adam", actor_lr=1e-3, critic_lr=1e-2,
                  n_step=10, advantage_norm=True, seed=0)
offsets = episode_offsets(test_set, seed=0)
per_episode = {}
for mode in ("quantized", "none", "raw"):
    ck = train(train_set, spec, NetworkConfig(sensor_mode=mode), cfg).checkpoint
    ev = evaluate(test_set, ck, spec, offsets=offsets)
    per_episode[mode] = [s.mean_qoe for s in ev.summaries]
    print(f"sensor_mode={mode:9s} test QoE {ev.summary.mean_qoe:.3f}")

# Paired over test episodes for this one training seed; the acceptance suite pairs over seeds.
for other in ("none", "raw"):
    p = paired_bootstrap(per_episode["quantized"], per_episode[other])
    print(f"quantized minus {other:4s} {p.mean_diff:+.3f}  [{p.diff_lo:+.3f}, {p.diff_hi:+.3f}]")
