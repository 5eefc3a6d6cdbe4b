"""Engine configuration: one JSON file, dotted-key overrides, strict validation.

The configuration is a tree of frozen dataclasses. Every run resolves its
full configuration (defaults, file, then --set overrides) and writes it next
to its outputs, so runs are self-describing.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, DomainError
from .frustum import FrustumParams, SamplerConfig
from .scheduler import SchedulerConfig
from .trajectory_ops import DEFAULT_LOOKAT_DEPTH, ShotKind


@dataclass(frozen=True)
class RetrievalConfig:
    """Retrieval behavior: how many entries to fetch and how to scope the pool.

    k here is the retrieval count l, which may exceed the model context size
    (scheduler.k); the planner then reduces the surplus by merging.
    """

    k: int = 4
    tie_rule: str = "recent_first"
    cross_chunk: bool = False
    include_source: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise DomainError(f"retrieval k must be >= 1, got {self.k}")
        if self.tie_rule not in ("recent_first", "oldest_first"):
            raise DomainError(f"unknown tie rule {self.tie_rule!r}")


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    point_count: int = 1000
    extent: float = 10.0
    moving_fraction: float = 0.0
    velocity_scale: float = 0.02


@dataclass(frozen=True)
class ShotsConfig:
    """Benchmark shot generation: per-family magnitudes and shared geometry."""

    frame_count: int = 93
    rotate_angle: float = math.pi / 4
    tilt_angle: float = math.pi / 6
    translate_distance: float = 0.5
    zoom_distance: float = 2.0
    lookat_depth: float = DEFAULT_LOOKAT_DEPTH

    def __post_init__(self) -> None:
        if self.frame_count < 2:
            raise DomainError(f"shot frame_count must be >= 2, got {self.frame_count}")

    def magnitudes(self) -> dict[ShotKind, float]:
        rotate = {
            ShotKind.ROTATION_LEFT, ShotKind.ROTATION_RIGHT,
            ShotKind.ARC_RIGHT_WITH_ROT, ShotKind.ARC_LEFT_WITH_ROT,
            ShotKind.AZIMUTH_RIGHT, ShotKind.AZIMUTH_LEFT,
        }
        tilt = {ShotKind.TILT_UP, ShotKind.TILT_DOWN, ShotKind.ELEVATION_UP}
        translate = {ShotKind.TRANSLATE_DOWN_WITH_ROT, ShotKind.TRANSLATE_UP_WITH_ROT}
        out = {}
        for kind in ShotKind:
            if kind in rotate:
                out[kind] = self.rotate_angle
            elif kind in tilt:
                out[kind] = self.tilt_angle
            elif kind in translate:
                out[kind] = self.translate_distance
            else:
                out[kind] = self.zoom_distance
        return out


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/run"
    emit_svg: bool = True
    # Merged intermediate videos are planning scaffolding; banking them is
    # opt-in for study.
    bank_intermediates: bool = False


@dataclass(frozen=True)
class EngineConfig:
    frustum: FrustumParams = field(default_factory=FrustumParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    shots: ShotsConfig = field(default_factory=ShotsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {
    "frustum": FrustumParams,
    "sampler": SamplerConfig,
    "scheduler": SchedulerConfig,
    "retrieval": RetrievalConfig,
    "scene": SceneConfig,
    "shots": ShotsConfig,
    "output": OutputConfig,
}


def default_config() -> EngineConfig:
    return EngineConfig()


def config_to_dict(config: EngineConfig) -> dict[str, Any]:
    return dataclasses.asdict(config)


def config_from_dict(doc: dict[str, Any]) -> EngineConfig:
    """Build a config from a (possibly partial) nested dict; unknown keys fail."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be an object, got {type(doc).__name__}")
    sections: dict[str, Any] = {}
    for name, value in doc.items():
        cls = _SECTIONS.get(name)
        if cls is None:
            raise ConfigError(f"unknown config section {name!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"config section {name!r} must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(value) - known
        if unknown:
            raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
        try:
            sections[name] = cls(**value)
        except (DomainError, TypeError) as e:
            raise ConfigError(f"invalid config section {name!r}: {e}") from e
    return EngineConfig(**sections)


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    try:
        return config_from_dict(doc)
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e


def save_config(config: EngineConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _parse_scalar(text: str) -> Any:
    low = text.strip().lower()
    if low in ("none", "null"):
        return None
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def apply_overrides(config: EngineConfig, overrides: list[str]) -> EngineConfig:
    """Apply --set style overrides like "retrieval.k=2" to a config."""
    doc = config_to_dict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {key!r} must be section.key")
        section, name = parts
        if section not in doc:
            raise ConfigError(f"unknown config section {section!r}")
        if name not in doc[section]:
            raise ConfigError(f"unknown key {name!r} in section {section!r}")
        doc[section][name] = _parse_scalar(raw)
    return config_from_dict(doc)
