"""Pipeline configuration: defaults, JSON config files and flag overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .morphology import PreprocessParams
from .search import SearchParams
from .spline import SmoothingParams
from .tracker import TrackerParams


@dataclass(frozen=True)
class EvalParams:
    vertical_tol: Optional[int] = None  # None: rounded mean staff thickness of the page

    def __post_init__(self):
        if self.vertical_tol is not None and self.vertical_tol < 1:
            raise ValueError("vertical_tol must be >= 1")


SECTIONS = {
    "preprocess": PreprocessParams,
    "search": SearchParams,
    "tracker": TrackerParams,
    "smoothing": SmoothingParams,
    "evaluation": EvalParams,
}

# CLI flag -> (section, field)
FLAG_FIELDS = {
    "stripes": ("search", "n_stripes"),
    "ma_length": ("search", "ma_length"),
    "proj_threshold_frac": ("search", "threshold_frac"),
    "sep_min": ("search", "sep_min"),
    "sep_max": ("search", "sep_max"),
    "spacing_tol": ("search", "spacing_tol"),
    "min_area": ("preprocess", "min_area"),
    "spline_p": ("smoothing", "p"),
    "seed_tile_width_frac": ("tracker", "seed_tile_width_frac"),
    "seed_tile_height": ("tracker", "seed_tile_height"),
    "slope_window_frac": ("tracker", "slope_window_frac"),
    "search_halfwidth_frac": ("tracker", "search_halfwidth_frac"),
    "removal_margin_frac": ("tracker", "removal_margin_frac"),
    "vertical_tol": ("evaluation", "vertical_tol"),
}


@dataclass(frozen=True)
class Config:
    preprocess: PreprocessParams = field(default_factory=PreprocessParams)
    search: SearchParams = field(default_factory=SearchParams)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)
    evaluation: EvalParams = field(default_factory=EvalParams)

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    @classmethod
    def from_dict(cls, data: dict, base: Optional["Config"] = None) -> "Config":
        """Overlay a nested {section: {field: value}} mapping on ``base``."""
        cfg = base or cls()
        for section, values in data.items():
            if section not in SECTIONS:
                raise ValueError(f"unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ValueError(f"config section {section!r} must be an object")
            known = {f.name for f in fields(SECTIONS[section])}
            unknown = set(values) - known
            if unknown:
                raise ValueError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
            cfg = replace(cfg, **{section: replace(getattr(cfg, section), **values)})
        return cfg

    def with_flags(self, flags: dict) -> "Config":
        """Apply non-None flag values (keyed by FLAG_FIELDS names)."""
        nested: dict = {}
        for flag, value in flags.items():
            if value is None or flag not in FLAG_FIELDS:
                continue
            section, name = FLAG_FIELDS[flag]
            nested.setdefault(section, {})[name] = value
        return Config.from_dict(nested, self)


def load_config(path=None, flags: Optional[dict] = None) -> Config:
    """Defaults, then the JSON file, then explicit flags."""
    cfg = Config()
    if path is not None:
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        cfg = Config.from_dict(data, cfg)
    if flags:
        cfg = cfg.with_flags(flags)
    return cfg
