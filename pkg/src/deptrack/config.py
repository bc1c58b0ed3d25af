"""Run configuration: ``key = value`` lines with dotted keys and ``#`` comments.

Every field of the nested dataclasses below is a key, e.g. ``tracker.gamma``,
``tracker.kalman.std_pos``, ``scene.depth_noise`` or ``sweep.windows``. Keys
that are not set keep the defaults shown by :func:`format_config`.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .depth_labels import WindowSpec
from .sim import SCENARIOS, DetectorModel, SceneSpec, make_scenario
from .tracker import TrackerConfig


class ConfigError(ValueError):
    """Unknown key or unparseable value in a run configuration."""


@dataclass(frozen=True)
class SceneConfig:
    scenarios: str = ",".join(SCENARIOS)
    seed: int = 0
    seeds: int = 5
    frames: int = 120
    width: int = 640
    height: int = 360
    depth_noise: float = 0.05
    jitter_sigma: float = 1.5
    miss_rate_base: float = 0.02
    miss_rate_occluded: float = 0.3
    score_noise: float = 0.1
    merge: str = "auto"  # auto: per-scenario default; on / off force it

    def __post_init__(self):
        if self.merge not in ("auto", "on", "off"):
            raise ValueError(f"merge must be auto, on or off, got {self.merge!r}")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        self.detector  # validates the rates

    @property
    def detector(self) -> DetectorModel:
        return DetectorModel(self.jitter_sigma, self.miss_rate_base, self.miss_rate_occluded, self.score_noise)

    def scene(self, name: str, seed: int) -> SceneSpec:
        merge = None if self.merge == "auto" else self.merge == "on"
        return make_scenario(name, seed, frames=self.frames, width=self.width, height=self.height,
                             detector=self.detector, depth_noise=self.depth_noise, merge=merge)

    def suite(self) -> list[SceneSpec]:
        """Scenario-major list of every (scenario, seed) scene."""
        return [self.scene(n, self.seed + k) for n in self.scenario_list for k in range(self.seeds)]

    @property
    def scenario_list(self) -> list[str]:
        names = [s.strip().upper() for s in self.scenarios.split(",") if s.strip()]
        bad = [n for n in names if n not in SCENARIOS]
        if bad or not names:
            raise ConfigError(f"scene.scenarios: unknown scenario(s) {bad or self.scenarios!r}")
        return names


@dataclass(frozen=True)
class SweepConfig:
    tracker: str = "byte"
    gammas: str = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
    windows: str = "1:1,2:1,4:2,6:3,8:4"
    window_gamma: float = 0.2

    @property
    def gamma_list(self) -> list[float]:
        try:
            return [float(g) for g in self.gammas.split(",")]
        except ValueError:
            raise ConfigError(f"sweep.gammas: cannot parse {self.gammas!r}") from None

    @property
    def window_list(self) -> list[WindowSpec]:
        try:
            return [WindowSpec(*(int(v) for v in w.split(":"))) for w in self.windows.split(",")]
        except (TypeError, ValueError):
            raise ConfigError(f"sweep.windows: cannot parse {self.windows!r}") from None


@dataclass(frozen=True)
class LabelConfig:
    window: int = 1
    stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    label: LabelConfig = field(default_factory=LabelConfig)


def _default(f: dataclasses.Field) -> Any:
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def _leaves(obj, prefix: str = "") -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(v):
            out.update(_leaves(v, key + "."))
        else:
            out[key] = v
    return out


DEFAULT_KEYS = _leaves(RunConfig())


def _parse_value(key: str, raw: str, like: Any) -> Any:
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {type(like).__name__}, got {raw!r}") from None
    return raw


def _build(cls, values: dict[str, Any], prefix: str = ""):
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f"{prefix}{f.name}"
        d = _default(f)
        if dataclasses.is_dataclass(d):
            kwargs[f.name] = _build(type(d), values, key + ".")
        elif key in values:
            kwargs[f.name] = values[key]
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: {e}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in DEFAULT_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw, DEFAULT_KEYS[key])
    cfg = _build(RunConfig, values)
    cfg.scene.scenario_list, cfg.sweep.gamma_list, cfg.sweep.window_list  # validate eagerly
    if cfg.sweep.tracker not in ("sort", "byte"):
        raise ConfigError(f"sweep.tracker: expected 'sort' or 'byte', got {cfg.sweep.tracker!r}")
    return cfg


def read_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))


def format_config(cfg: RunConfig) -> str:
    """Every key with its value, in a form :func:`parse_config` reads back."""
    return "".join(f"{k} = {v}\n" for k, v in _leaves(cfg).items())


def with_overrides(cfg: RunConfig, **dotted) -> RunConfig:
    """Copy of ``cfg`` with dotted keys (``__`` stands for ``.``) replaced."""
    values = _leaves(cfg)
    for k, v in dotted.items():
        key = k.replace("__", ".")
        if key not in values:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = v
    return _build(RunConfig, values)
