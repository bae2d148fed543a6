"""Run configuration: INI file plus command-line overrides.

The file is plain INI with one section per stage. Every key is optional::

    [run]
    seed = 7

    [preprocess]
    median_window_gyro = 9
    kalman_q = 0.001

    [fusion]
    interval_ms = 2
    strategy = G3A3

    [segmentation]
    half_window = 25
    peak_threshold = 0.4
    match_tolerance_ms = 60
    peak_lag_ms = auto

    [training]
    epochs = auto
    hidden = 128
    folds = 5
    online = false

    [synth]
    instances_per_key = 20
    snr = 6
    alphabet = 1,2,3,4,5,6,7,8,9,*,0,#

Each key also exists as a flag with dashes (``--kalman-q``); flags win over
the file, which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace

from .evaluation import DEFAULT_FOLDS, DEFAULT_HIDDEN
from .experiments import PipelineConfig
from .fusion import FusionConfig
from .preprocess import PreprocessConfig
from .segmentation import HALF_WINDOW, MATCH_TOLERANCE_MS, PEAK_THRESHOLD
from .synthgen import SynthConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentationSettings:
    half_window: int = HALF_WINDOW
    peak_threshold: float = PEAK_THRESHOLD
    match_tolerance_ms: float = MATCH_TOLERANCE_MS
    peak_lag_ms: float | None = None


@dataclass(frozen=True)
class TrainingSettings:
    # None picks the mode default: 100 for cross-validation, 200 for transfer.
    epochs: int | None = None
    hidden: int = DEFAULT_HIDDEN
    folds: int = DEFAULT_FOLDS
    online: bool = False

    def __post_init__(self):
        if (self.epochs is not None and self.epochs < 1) or self.hidden < 1:
            raise ValueError("epochs and hidden must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings = field(default_factory=RunSettings)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    segmentation: SegmentationSettings = field(default_factory=SegmentationSettings)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    synth: SynthConfig = field(default_factory=SynthConfig)

    @property
    def seed(self) -> int:
        return self.run.seed

    def pipeline(self) -> PipelineConfig:
        s = self.segmentation
        return PipelineConfig(
            self.preprocess, self.fusion, s.half_window, s.peak_threshold, s.match_tolerance_ms, s.peak_lag_ms
        )

    def synth_config(self, **overrides) -> SynthConfig:
        return replace(self.synth, seed=self.seed, **overrides)


SECTIONS = ("run", "preprocess", "fusion", "segmentation", "training", "synth")
# Synth seed always follows the run seed.
_HIDDEN_KEYS = {("synth", "seed")}


def _keys(section: str) -> list[str]:
    cls = type(getattr(RunConfig(), section))
    return [f.name for f in fields(cls) if (section, f.name) not in _HIDDEN_KEYS]


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(section: str, key: str, text: str):
    default = getattr(getattr(RunConfig(), section), key)
    text = text.strip()
    if key == "alphabet":
        syms = tuple(s.strip() for s in text.split(",") if s.strip())
        if not syms:
            raise ValueError("empty alphabet")
        return syms
    if key == "peak_lag_ms":
        return None if text.lower() == "auto" else float(text)
    if key == "epochs":
        return None if text.lower() == "auto" else int(text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        v = float(text)
        if math.isnan(v):
            raise ValueError("NaN is not allowed")
        return v
    return text


def read_config_file(path: os.PathLike | str) -> dict[str, dict[str, object]]:
    """Parsed overrides from an INI file, validated against known keys."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        known = _keys(section)
        for key, text in parser.items(section):
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            try:
                out.setdefault(section, {})[key] = _parse_value(section, key, text)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from None
    return out


def build_config(*layers: dict[str, dict[str, object]]) -> RunConfig:
    """Apply override layers in order over the defaults and validate."""
    merged: dict[str, dict[str, object]] = {}
    for layer in layers:
        for section, values in layer.items():
            merged.setdefault(section, {}).update(values)
    base = RunConfig()
    parts = {}
    for section in SECTIONS:
        try:
            parts[section] = replace(getattr(base, section), **merged.get(section, {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {exc}") from None
    config = RunConfig(**parts)
    try:
        config.pipeline()
        config.synth_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """One flag per configuration key, defaulting to "not given"."""
    parser.add_argument("--config", metavar="FILE", help="INI configuration file")
    for section in SECTIONS:
        group = parser.add_argument_group(f"[{section}] settings")
        for key in _keys(section):
            default = getattr(getattr(RunConfig(), section), key)
            dest = f"cfg__{section}__{key}"
            if isinstance(default, bool):
                group.add_argument(flag_name(key), dest=dest, action=argparse.BooleanOptionalAction, default=None)
                continue
            if key == "strategy":
                help_text = "fusion strategy (g3, a3, gmean, amean, gmeanamean, gmeana3, g3amean, g3a3)"
            elif key == "peak_lag_ms":
                help_text = "label-to-peak shift in ms, or 'auto'"
            elif key == "epochs":
                help_text = "training epochs, or 'auto' (100, or 200 in transfer mode)"
            elif key == "alphabet":
                help_text = "comma-separated key symbols"
            else:
                help_text = f"default {default}"
            group.add_argument(flag_name(key), dest=dest, metavar="V", default=None, help=help_text)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    layers = []
    if getattr(args, "config", None):
        layers.append(read_config_file(args.config))
    flags: dict[str, dict[str, object]] = {}
    for name, value in vars(args).items():
        if not name.startswith("cfg__") or value is None:
            continue
        _, section, key = name.split("__", 2)
        if not isinstance(value, bool):
            try:
                value = _parse_value(section, key, value)
            except ValueError as exc:
                raise ConfigError(f"{flag_name(key)}: {exc}") from None
        flags.setdefault(section, {})[key] = value
    layers.append(flags)
    return build_config(*layers)
