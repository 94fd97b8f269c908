"""JSON configuration with two profiles: ``desk`` (small, fast) and ``paper`` (full widths)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .bench import BenchConfig, SyntheticSpec
from .figop import SamplingConfig
from .judge.client import JudgeConfig
from .trainer import TrainConfig

PROFILES = ("desk", "paper")
CIDER_SCALES = ("conventional", "raw")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelDims:
    N: int = 16
    d_v: int = 64
    d_a: int = 32
    d_m: int = 32
    d_p: int = 32
    d_hidden: int = 32
    d_ff: int = 64
    d_llm: int = 96
    temporal_heads: int = 1
    fusion_heads: int = 1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"dims.{f.name} must be an integer >= 1, got {v!r}")
        if self.d_p % self.temporal_heads:
            raise ConfigError("d_p must be divisible by temporal_heads")
        if self.d_a % self.fusion_heads or self.d_v % self.fusion_heads:
            raise ConfigError("d_a and d_v must be divisible by fusion_heads")


@dataclass(frozen=True)
class MetricFlags:
    bleu_smoothing: bool = False
    cider_scale: str = "conventional"

    def __post_init__(self):
        if self.cider_scale not in CIDER_SCALES:
            raise ConfigError(f"metrics.cider_scale must be one of {CIDER_SCALES}")


PAPER_DIMS = ModelDims(N=256, d_v=4096, d_a=4096, d_m=4096, d_p=256, d_hidden=256, d_ff=1024, d_llm=4096)


@dataclass(frozen=True)
class GlobalConfig:
    profile: str = "desk"
    seed: int = 0
    dims: ModelDims = field(default_factory=ModelDims)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    metrics: MetricFlags = field(default_factory=MetricFlags)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def profile_defaults(profile: str) -> GlobalConfig:
    if profile == "paper":
        return GlobalConfig(profile="paper", dims=PAPER_DIMS, sampling=SamplingConfig(2.0, 8, 15))
    return GlobalConfig(profile=profile)


def _build(cls, base, data, where: str):
    """Overlay ``data`` onto dataclass instance ``base``, recursing into nested dataclasses."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    values = {}
    for name in known:
        current = getattr(base, name)
        if name not in data:
            values[name] = current
        elif dataclasses.is_dataclass(current):
            values[name] = _build(type(current), current, data[name], f"{where}.{name}")
        elif isinstance(current, tuple):
            values[name] = tuple(data[name])
        else:
            values[name] = data[name]
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> GlobalConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    base = profile_defaults(data.get("profile", "desk"))
    cfg = _build(GlobalConfig, base, data, "config")
    if not all(isinstance(k, str) and isinstance(v, str) for k, v in cfg.paths.items()):
        raise ConfigError("paths must map names to strings")
    return cfg


def load_config(path) -> GlobalConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def save_config(cfg: GlobalConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")


__all__ = ["BenchConfig", "ConfigError", "GlobalConfig", "MetricFlags", "ModelDims", "PAPER_DIMS",
           "SyntheticSpec", "config_from_dict", "load_config", "profile_defaults", "save_config"]
