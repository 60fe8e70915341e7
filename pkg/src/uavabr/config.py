"""Run configuration: one record merging every sub-config, loaded from JSON
or from ``section.field = value`` lines."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .agent import TrainConfig
from .baselines import BaselineConfig
from .nn import NetworkConfig
from .playback import VideoSpec
from .qoe import QoEConfig
from .sensors import QuantizerConfig
from .traces import SynthParams


class ConfigError(ValueError):
    pass


SECTIONS = {
    "video": VideoSpec,
    "quantizer": QuantizerConfig,
    "qoe": QoEConfig,
    "network": NetworkConfig,
    "train": TrainConfig,
    "baseline": BaselineConfig,
    "synth": SynthParams,
}


@dataclass(frozen=True)
class RunConfig:
    video: VideoSpec = field(default_factory=VideoSpec)
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    qoe: QoEConfig = field(default_factory=QoEConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    synth: SynthParams = field(default_factory=SynthParams)
    corpus: str | None = None
    out_dir: str = "out"
    seed: int = 0
    train_fraction: float = 0.8

    def to_dict(self) -> dict:
        return asdict(self)


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _build(section: str, cls, values: dict):
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown field")
    try:
        return cls(**{k: _tuplify(v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def from_dict(data: dict) -> RunConfig:
    kwargs = {}
    top = {f.name for f in fields(RunConfig)}
    for key, value in data.items():
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a mapping")
            kwargs[key] = _build(key, SECTIONS[key], value)
        elif key in top:
            kwargs[key] = value
        else:
            raise ConfigError(f"{key}: unknown config key")
    cfg = RunConfig(**kwargs)
    if cfg.network.num_actions != len(cfg.video.ladder):
        if "network" in data and "num_actions" in data["network"]:
            raise ConfigError("network.num_actions: must equal the ladder length")
        cfg = replace(cfg, network=replace(cfg.network, num_actions=len(cfg.video.ladder)))
    if cfg.qoe.ladder is not None and cfg.qoe.ladder != cfg.video.ladder:
        lmin = cfg.video.ladder[0]
        if "qoe" in data and "l_min" in data["qoe"]:
            lmin = cfg.qoe.l_min
        cfg = replace(cfg, qoe=replace(cfg.qoe, ladder=cfg.video.ladder, l_min=lmin))
    if not 0 < cfg.train_fraction < 1:
        raise ConfigError("train_fraction: must be in (0, 1)")
    return cfg


def parse_text(text: str) -> dict:
    """JSON object, or ``section.field = value`` lines (values as JSON literals)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        return data
    data: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if "." in key:
            section, name = key.split(".", 1)
            data.setdefault(section, {})[name] = value
        else:
            data[key] = value
    return data


def load_config(path: str | os.PathLike | None, **overrides) -> RunConfig:
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"{p}: config file not found")
        data = parse_text(p.read_text(encoding="utf-8"))
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            data.setdefault(section, {})[name] = value
        else:
            data[key] = value
    return from_dict(data)
