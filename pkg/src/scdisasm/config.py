"""Run configuration: one dataclass, an INI-style loader, validation.

Config files are plain ``key = value`` lines under four sections
([paths], [simulator], [pipeline], [run]); every key is optional and
falls back to the dataclass default. Unknown sections or keys are
errors, not warnings, so typos surface immediately.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace

from .errors import ConfigError

SELECTORS = ("mrmr", "filter", "gini", "pca")
CLASSIFIERS = ("qda", "lda")
MODES = ("offline", "realtime-emu")
LAYOUTS = ("default", "complementary", "copy")

DEFAULT_BENCHMARKS = ("timeloop", "matrix", "decimaldivision",
                      "decimal2float", "ascii", "adconverter")


@dataclass
class RunConfig:
    # paths
    out_dir: str = "out"
    dataset_path: str = "dataset.scdt"
    model_path: str = "model.json"
    # simulator
    window: int = 315
    n_per_class: int = 3000
    noise_sigma: float = 0.04
    dc_wander: float = 0.03
    offset_spread: float = 0.05
    rt_noise_scale: float = 1.5
    bleed: float = 0.25
    layout: str = "default"
    dev_harmonics: int = 24
    seed: int = 1
    # pipeline
    w_star: int = 50
    realtime_w_star: int = 70
    selector: str = "mrmr"
    classifier: str = "qda"
    bins: int = 32
    q: int = 12
    # Per-window covariance updates stay well conditioned only while
    # theta * updates-per-class is small; 0.002 keeps a 400-window batch
    # in that regime. None derives the batch/train ratio instead, which
    # suits pooled batch statistics, not a per-window recursion.
    theta: float | None = 0.002
    batch_size: int = 400
    mode: str = "offline"
    feature_counts: tuple[int, ...] = (5, 10, 25, 50, 70)
    # run
    benchmarks: tuple[str, ...] = DEFAULT_BENCHMARKS
    eval_windows: int = 600
    timeline_seeds: int = 1
    sweep_points: tuple[int, ...] = (5, 10, 20, 30, 40, 80, 160)
    clock_hz: float = 160e6
    sampling_ratio: int = 160

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        for name in ("window", "n_per_class", "w_star", "realtime_w_star",
                     "bins", "batch_size", "eval_windows", "seed",
                     "sampling_ratio", "dev_harmonics", "timeline_seeds"):
            if int(getattr(self, name)) < 1:
                bad(name, "must be a positive integer")
        for name in ("noise_sigma", "dc_wander", "offset_spread", "bleed"):
            if float(getattr(self, name)) < 0:
                bad(name, "must be non-negative")
        if self.rt_noise_scale < 1.0:
            bad("rt_noise_scale", "real-time capture chain cannot beat "
                "the reference scope; must be >= 1")
        if self.w_star > self.window:
            bad("w_star", f"exceeds window length {self.window}")
        if self.realtime_w_star > self.window:
            bad("realtime_w_star", f"exceeds window length {self.window}")
        if self.selector not in SELECTORS:
            bad("selector", f"must be one of {SELECTORS}")
        if self.classifier not in CLASSIFIERS:
            bad("classifier", f"must be one of {CLASSIFIERS}")
        if self.mode not in MODES:
            bad("mode", f"must be one of {MODES}")
        if self.layout not in LAYOUTS:
            bad("layout", f"must be one of {LAYOUTS}")
        if not 8 <= self.q <= 14:
            bad("q", "must lie in [8, 14]")
        if self.theta is not None and not 0.0 < self.theta <= 1.0:
            bad("theta", "must lie in (0, 1] (or 'auto')")
        if not self.feature_counts:
            bad("feature_counts", "must not be empty")
        for k in self.feature_counts:
            if not 1 <= k <= self.window:
                bad("feature_counts", f"entry {k} outside [1, {self.window}]")
        if not self.benchmarks:
            bad("benchmarks", "must not be empty")
        for b in self.benchmarks:
            if not b:
                bad("benchmarks", "empty benchmark name")
        for p in self.sweep_points:
            if p < 1:
                bad("sweep_points", f"entry {p} must be positive")
        if self.clock_hz <= 0:
            bad("clock_hz", "must be positive")


def _parse_theta(raw: str):
    if raw.strip().lower() in ("auto", "none", ""):
        return None
    return float(raw)


def _parse_int_list(raw: str):
    return tuple(int(tok) for tok in raw.replace(",", " ").split())


def _parse_str_list(raw: str):
    return tuple(tok.strip() for tok in raw.split(",") if tok.strip())


# section -> key -> (attribute, parser)
_SCHEMA = {
    "paths": {
        "out_dir": ("out_dir", str),
        "dataset": ("dataset_path", str),
        "model": ("model_path", str),
    },
    "simulator": {
        "window": ("window", int),
        "n_per_class": ("n_per_class", int),
        "noise_sigma": ("noise_sigma", float),
        "dc_wander": ("dc_wander", float),
        "offset_spread": ("offset_spread", float),
        "rt_noise_scale": ("rt_noise_scale", float),
        "bleed": ("bleed", float),
        "layout": ("layout", str),
        "dev_harmonics": ("dev_harmonics", int),
        "seed": ("seed", int),
    },
    "pipeline": {
        "w_star": ("w_star", int),
        "realtime_w_star": ("realtime_w_star", int),
        "selector": ("selector", str),
        "classifier": ("classifier", str),
        "bins": ("bins", int),
        "q": ("q", int),
        "theta": ("theta", _parse_theta),
        "batch_size": ("batch_size", int),
        "mode": ("mode", str),
        "feature_counts": ("feature_counts", _parse_int_list),
    },
    "run": {
        "benchmarks": ("benchmarks", _parse_str_list),
        "eval_windows": ("eval_windows", int),
        "timeline_seeds": ("timeline_seeds", int),
        "sweep_points": ("sweep_points", _parse_int_list),
        "clock_hz": ("clock_hz", float),
        "sampling_ratio": ("sampling_ratio", int),
    },
}


def load_config(path) -> RunConfig:
    """Parse an INI-style config file into a validated RunConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            attr, parse = _SCHEMA[section][key]
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
    return RunConfig(**values)


def override(config: RunConfig, **changes) -> RunConfig:
    """Replace fields (dropping None values) and re-validate."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(config, **changes)


def config_dict(config: RunConfig) -> dict:
    """Flat, JSON-friendly echo of every field for report determinism."""
    out = {}
    for f in fields(config):
        v = getattr(config, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out
