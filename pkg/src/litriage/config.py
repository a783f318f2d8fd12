"""Run configuration: one YAML document, overridable by CLI flags.

Schema (all keys optional, ``version`` must be 1 when present)::

    version: 1
    query: glaucoma deep learning
    max_articles: 100
    year_range: [2015, 2022]
    require_abstract: true
    taxonomy: taxonomy.yaml
    annotations: annotations.jsonl
    input_modes: [appended]          # abstract | title | fused | appended
    backend: mock                    # or the scoring service URL
    threshold: 0.5
    sweep_grid: [0.05, ..., 0.95]
    objective: f1
    tuning_fraction: 0.5
    hierarchical: false
    parallelism: 1
    char_budget: 4000
    template: "This example is about {}."
    seed: 0
    out_dir: triage-out
    fixtures: null                   # recorded-response directory (offline)
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .decisions import DEFAULT_GRID, INPUT_MODES
from .errors import DataError
from .scoring import DEFAULT_CHAR_BUDGET, DEFAULT_TEMPLATE

CONFIG_VERSION = 1


@dataclass
class RunConfig:
    query: str = ""
    max_articles: int = 100
    year_range: tuple[int, int] | None = None
    require_abstract: bool = False
    taxonomy: str | None = None
    annotations: str | None = None
    input_modes: tuple[str, ...] = ("appended",)
    backend: str = "mock"
    threshold: float = 0.5
    sweep_grid: tuple[float, ...] = DEFAULT_GRID
    objective: str = "f1"
    tuning_fraction: float = 0.5
    hierarchical: bool = False
    parallelism: int = 1
    char_budget: int = DEFAULT_CHAR_BUDGET
    template: str = DEFAULT_TEMPLATE
    seed: int = 0
    out_dir: str = "triage-out"
    fixtures: str | None = None


def load_run_config(path: str | Path | None, **overrides: Any) -> RunConfig:
    """Build a config from an optional YAML file plus flag overrides.

    Overrides with value None mean "not given on the command line".
    """
    values: dict[str, Any] = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise DataError(f"{path}: not valid YAML: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError(f"{path}: config must be a mapping")
        version = doc.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise DataError(f"{path}: unsupported config version {version!r}")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
        values.update(doc)
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    if "year_range" in values and values["year_range"] is not None:
        lo, hi = values["year_range"]
        values["year_range"] = (int(lo), int(hi))
    for key in ("input_modes", "sweep_grid"):
        if key in values and values[key] is not None:
            values[key] = tuple(values[key])
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise DataError(f"bad config value: {exc}") from exc


def validate_config(
    config: RunConfig,
    need_query: bool = False,
    need_taxonomy: bool = False,
    need_annotations: bool = False,
) -> None:
    """Check everything a command needs before any side effect."""
    if need_query and not config.query.strip():
        raise ValueError("a search query is required (set --query or the config file)")
    if need_taxonomy:
        if not config.taxonomy:
            raise ValueError("a taxonomy file is required (set --taxonomy or the config file)")
        if not Path(config.taxonomy).exists():
            raise DataError(f"taxonomy file not found: {config.taxonomy}")
    if need_annotations:
        if not config.annotations:
            raise ValueError("an annotations file is required (set --annotations or the config file)")
        if not Path(config.annotations).exists():
            raise DataError(f"annotations file not found: {config.annotations}")
    if config.max_articles < 1:
        raise ValueError("max_articles must be >= 1")
    if config.year_range is not None and config.year_range[0] > config.year_range[1]:
        raise ValueError(f"year range {list(config.year_range)} has min > max")
    bad_modes = [mode for mode in config.input_modes if mode not in INPUT_MODES]
    if bad_modes:
        raise ValueError(f"unknown input modes {bad_modes}; valid: {', '.join(INPUT_MODES)}")
    if not config.input_modes:
        raise ValueError("at least one input mode is required")
    if config.backend != "mock" and not config.backend.startswith(("http://", "https://")):
        raise ValueError(f"backend must be 'mock' or an http(s) URL, got {config.backend!r}")
    if not 0.0 < config.threshold < 1.0:
        raise ValueError("threshold must lie strictly in (0, 1)")
    if not 0.0 < config.tuning_fraction < 1.0:
        raise ValueError("tuning_fraction must lie strictly in (0, 1)")
    if config.parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if config.char_budget < 1:
        raise ValueError("char_budget must be >= 1")
    if config.fixtures and not Path(config.fixtures).is_dir():
        raise DataError(f"fixtures directory not found: {config.fixtures}")
