"""
Where do sensor readings start to hurt the link?
================================================

Sort (sensor, throughput) pairs by the sensor value, slide a window along
them and mark every point where the windowed mean throughput has dropped by
one bitrate step (0.95 Mbps) since the last mark.
"""

import numpy as np

from uavabr import QuantizerConfig, SynthParams, derive_thresholds, synthesize_corpus
from uavabr.sensors import sensor_pairs

# Plant a sharp knee: throughput halves beyond 50 m and nothing else matters.
knee = SynthParams(distance_profile=((0.0, 1.0), (50.0, 1.0), (50.001, 0.5)), velocity_profile=((0.0, 1.0),))
corpus = synthesize_corpus(knee, count=100, seed=3)
cfg = QuantizerConfig()
pairs = sensor_pairs(corpus.traces, "distance", cfg)
print(f"{len(pairs)} distance/throughput pairs")
print("distance thresholds (planted knee at 50 m):", [round(t, 2) for t in derive_thresholds(pairs, cfg)])

# The default generator has smoother gain curves, so thresholds spread out.
corpus = synthesize_corpus(SynthParams(), count=100, seed=3)
for sensor in ("distance", "velocity", "accel"):
    th = derive_thresholds(sensor_pairs(corpus.traces, sensor, cfg), cfg)
    print(f"{sensor:9s} thresholds: {np.round(th, 2).tolist()}")
