"""Sensor-augmented adaptive bitrate streaming for UAV video links.

Trace-driven playback simulation, QoE scoring, rule-based baselines and an
advantage actor-critic agent built on a small numpy LSTM.
"""

from .agent import Checkpoint, TrainConfig, evaluate, train
from .baselines import BaselineConfig, make_baseline
from .nn import NetworkConfig
from .playback import EpisodeLog, PlaybackState, VideoSpec, run_episode, step
from .qoe import QoEConfig, chunk_qoe, episode_summary
from .sensors import QuantizerConfig, derive_thresholds, quantize
from .traces import SENSOR_COUPLED, SynthParams, Trace, load_corpus, split, synthesize, synthesize_corpus

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig", "Checkpoint", "EpisodeLog", "NetworkConfig", "PlaybackState", "QoEConfig",
    "QuantizerConfig", "SENSOR_COUPLED", "SynthParams", "Trace", "TrainConfig", "VideoSpec", "chunk_qoe",
    "derive_thresholds", "episode_summary", "evaluate", "load_corpus", "make_baseline", "quantize",
    "run_episode", "split", "step", "synthesize", "synthesize_corpus", "train",
]
