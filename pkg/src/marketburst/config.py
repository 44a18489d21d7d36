"""Pipeline configuration: defaults, INI-style file parsing, and docs.

The file format is flat key/value pairs grouped in sections, one per
pipeline stage. Every key is optional; anything missing takes the
default shown by :func:`default_config_text`, which doubles as the
format documentation.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs for the end-to-end pipeline, flat for easy plumbing."""

    # [paths] inputs; empty strings mean "use the packaged default"
    tweets: str = "tweets.jsonl"
    market: str = "market.csv"
    calendar: str = "calendar.json"
    lexicon: str = ""
    stopwords: str = ""

    # [detect]
    bandwidth_s: float = 600.0
    tick_s: float = 60.0
    cluster_cutoff: float = 0.7
    linkage: str = "average"
    corr_grid_s: float = 300.0
    calibration_grid_s: float = 300.0
    min_word_count: int = 5
    update_factor: float = 1.1
    max_event_hours: float = 24.0
    market_lat: float = 37.9838
    market_lon: float = 23.7275

    # [label]
    volatility_window: int = 24
    multipliers: tuple[float, ...] = (2.0, 2.5, 3.0)
    t_time_s: float = 3600.0
    slope_baseline_mode: str = "abs"

    # [train]
    folds: int = 10
    c_grid: tuple[float, ...] = (1.0, 10.0)
    weight_grid: tuple[float, ...] = (1.0, 2.0, 4.0)
    kernels: tuple[str, ...] = ("linear", "poly2", "poly3", "gaussian")
    gaussian_width: float = 1.0
    poly_coef0: float = 1.0
    selection: str = "cfs"
    infogain_bins: int = 10
    kkt_tol: float = 1e-3
    max_sweeps: int = 20000

    # [evaluate]
    markov_order: int = 1

    # [baseline]
    sentiment_window_s: float = 7200.0
    sentiment_step_s: float = 300.0
    baseline_max_shift_s: float = 86400.0

    # [keywords]
    keyword_max_words: int = 2
    keyword_min_occurrences: int = 4
    keyword_min_score: float = 1.2

    # [run]
    training_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.training_fraction < 1.0:
            raise ValueError("training_fraction must be in (0, 1)")
        for name in ("bandwidth_s", "tick_s", "cluster_cutoff", "corr_grid_s",
                     "calibration_grid_s", "update_factor", "max_event_hours",
                     "t_time_s", "gaussian_width", "kkt_tol",
                     "sentiment_window_s", "sentiment_step_s",
                     "baseline_max_shift_s", "keyword_min_score"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("volatility_window", "folds", "min_word_count",
                     "infogain_bins", "max_sweeps", "keyword_max_words",
                     "keyword_min_occurrences", "markov_order"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if any(m <= 0 for m in self.multipliers):
            raise ValueError("multipliers must be positive")
        if self.selection not in ("cfs", "infogain"):
            raise ValueError("selection must be cfs or infogain")
        if self.slope_baseline_mode not in ("abs", "positive", "signed"):
            raise ValueError("slope_baseline_mode must be abs/positive/signed")


_SECTIONS: dict[str, tuple[str, ...]] = {
    "paths": ("tweets", "market", "calendar", "lexicon", "stopwords"),
    "detect": ("bandwidth_s", "tick_s", "cluster_cutoff", "linkage",
               "corr_grid_s", "calibration_grid_s", "min_word_count",
               "update_factor", "max_event_hours", "market_lat", "market_lon"),
    "label": ("volatility_window", "multipliers", "t_time_s",
              "slope_baseline_mode"),
    "train": ("folds", "c_grid", "weight_grid", "kernels", "gaussian_width",
              "poly_coef0", "selection", "infogain_bins", "kkt_tol",
              "max_sweeps"),
    "evaluate": ("markov_order",),
    "baseline": ("sentiment_window_s", "sentiment_step_s",
                 "baseline_max_shift_s"),
    "keywords": ("keyword_max_words", "keyword_min_occurrences",
                 "keyword_min_score"),
    "run": ("training_fraction", "seed"),
}

_DOCS: dict[str, str] = {
    "tweets": "tweet stream, JSON lines with ts/text/user/followers/verified/lat/lon",
    "market": "intraday price bars, CSV with header ts,price",
    "calendar": "market session calendar JSON",
    "lexicon": "sentiment lexicon file; empty = packaged default",
    "stopwords": "stop word list; empty = packaged default",
    "bandwidth_s": "gaussian kernel bandwidth for word rates, seconds",
    "tick_s": "detection loop step, seconds",
    "cluster_cutoff": "correlation-distance dendrogram cut for word categories",
    "linkage": "agglomerative linkage: average, single, or complete",
    "corr_grid_s": "sample step for rate-correlation series, seconds",
    "calibration_grid_s": "sample step for threshold calibration, seconds",
    "min_word_count": "minimum training arrivals for a word to be clustered",
    "update_factor": "event re-emission when total rate exceeds this times the last",
    "max_event_hours": "age cap after which an event is closed and reopened",
    "market_lat": "market venue latitude for distance features",
    "market_lon": "market venue longitude for distance features",
    "volatility_window": "trailing bar count for the volatility stdev",
    "multipliers": "comma list of jitter threshold multipliers",
    "t_time_s": "max slot distance for event labels, seconds",
    "slope_baseline_mode": "baseline over volatility slopes: abs, positive, signed",
    "folds": "cross-validation folds",
    "c_grid": "comma list of soft-margin C values",
    "weight_grid": "comma list of positive-class loss weights",
    "kernels": "comma list from: linear, polyN, gaussian",
    "gaussian_width": "gaussian kernel width",
    "poly_coef0": "additive constant inside polynomial kernels",
    "selection": "feature selection method: cfs or infogain",
    "infogain_bins": "equal-frequency bins for information gain",
    "kkt_tol": "SMO optimality tolerance",
    "max_sweeps": "SMO sweep budget before aborting",
    "markov_order": "Markov chain order for entropy/MIR estimates",
    "sentiment_window_s": "baseline sentiment sliding window, seconds",
    "sentiment_step_s": "baseline sentiment sample step, seconds",
    "baseline_max_shift_s": "drop baseline events shifted further to an open",
    "keyword_max_words": "longest keyword phrase, in words",
    "keyword_min_occurrences": "minimum phrase occurrences to keep",
    "keyword_min_score": "minimum degree/frequency score to keep",
    "training_fraction": "fraction of the stream timespan used for training",
    "seed": "seed for every randomized step",
}

_TUPLE_FLOAT = {"multipliers", "c_grid", "weight_grid"}
_TUPLE_STR = {"kernels"}


def _parse_value(name: str, raw: str, target_type: type):
    raw = raw.strip()
    if name in _TUPLE_FLOAT:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if name in _TUPLE_STR:
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if target_type is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def load_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Defaults, overlaid with a config file, overlaid with overrides."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(str(path))
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        types = {f.name: f.type for f in fields(PipelineConfig)}
        py_types = {"float": float, "int": int, "str": str}
        known = {name for names in _SECTIONS.values() for name in names}
        for section in parser.sections():
            for name, raw in parser.items(section):
                if name not in known:
                    raise ValueError(f"unknown config key {name!r} in [{section}]")
                t = types[name]
                base = py_types.get(str(t).split("[")[0].strip(), str)
                values[name] = _parse_value(name, raw, base)
    values.update(overrides)
    return PipelineConfig(**values)


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def default_config_text(config: PipelineConfig | None = None) -> str:
    """Render a fully commented config file with the effective values."""
    config = config or PipelineConfig()
    lines = ["# marketburst pipeline configuration",
             "# every key is optional; the values below are the defaults", ""]
    for section, names in _SECTIONS.items():
        lines.append(f"[{section}]")
        for name in names:
            lines.append(f"# {_DOCS[name]}")
            lines.append(f"{name} = {_format_value(getattr(config, name))}")
        lines.append("")
    return "\n".join(lines)


def write_config(path: str | Path, config: PipelineConfig | None = None) -> None:
    Path(path).write_text(default_config_text(config), "utf-8")


def with_overrides(config: PipelineConfig, **overrides) -> PipelineConfig:
    return replace(config, **overrides)
