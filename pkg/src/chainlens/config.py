"""Run configuration: one declarative file, flag overrides, defaults.

A run is described by a single JSON file whose keys match RunConfig's
fields; every field has a default, so an empty file (or none at all) is
a valid configuration. Command-line flags override file values, which
override defaults. Unknown keys are rejected rather than ignored so a
typo cannot silently fall back to a default.

The API key deliberately has no config-file slot: secrets travel only
through the CHAINLENS_API_KEY environment variable.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .classifiers import CLASSIFIER_KINDS
from .correlation import METHODS
from .dataset import parse_day
from .errors import ChainlensError
from .synthetic import SyntheticSpec

FORMATS = ("csv", "json", "svg")

# Settings the 'generate' block may carry: every SyntheticSpec knob
# except the seed, which lives at the top level of the config.
GENERATE_KEYS = frozenset(f.name for f in fields(SyntheticSpec)) - {"seed"}

# Settings the 'api' block may carry. The key comes from the
# environment and the date range from the top-level start/end fields.
API_KEYS = frozenset(
    {"base_url", "rate_limit", "max_attempts", "backoff_seconds", "cache_dir"}
)


class ConfigError(ChainlensError):
    """Invalid configuration file or flag value; a usage error."""


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    out: str = "artifacts"
    seed: int = 0
    cutoff: str | None = None
    start: str | None = None
    end: str | None = None
    method: str = "all"
    k: int | str = "auto"
    classifier: str = "all"
    split: float = 0.8
    format: str = "svg"
    api: dict = field(default_factory=dict)
    generate: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS + ("all",):
            raise ConfigError(
                f"method must be one of {METHODS + ('all',)}, got {self.method!r}"
            )
        if self.classifier not in CLASSIFIER_KINDS + ("all",):
            raise ConfigError(
                f"classifier must be one of {CLASSIFIER_KINDS + ('all',)}, "
                f"got {self.classifier!r}"
            )
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must be in (0, 1), got {self.split}")
        if self.k != "auto":
            if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
                raise ConfigError(f"k must be 'auto' or a positive integer, got {self.k!r}")
        for name in ("cutoff", "start", "end"):
            value = getattr(self, name)
            if value is not None:
                try:
                    parse_day(value)
                except ValueError as exc:
                    raise ConfigError(f"bad {name} date: {exc}") from exc
        if not isinstance(self.api, dict) or not isinstance(self.generate, dict):
            raise ConfigError("'api' and 'generate' must be JSON objects")
        if "api_key" in self.api:
            raise ConfigError(
                "api_key does not belong in a config file; set CHAINLENS_API_KEY"
            )
        bad_api = set(self.api) - API_KEYS
        if bad_api:
            raise ConfigError(
                f"unknown 'api' settings {sorted(bad_api)}; allowed: {sorted(API_KEYS)}"
            )
        if "seed" in self.generate:
            raise ConfigError("set the seed at the top level, not inside 'generate'")
        bad_gen = set(self.generate) - GENERATE_KEYS
        if bad_gen:
            raise ConfigError(
                f"unknown 'generate' settings {sorted(bad_gen)}; "
                f"allowed: {sorted(GENERATE_KEYS)}"
            )

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "all" else (self.method,)

    @property
    def classifiers(self) -> tuple[str, ...]:
        return CLASSIFIER_KINDS if self.classifier == "all" else (self.classifier,)

    @property
    def k_value(self) -> int | None:
        return None if self.k == "auto" else int(self.k)

    @property
    def cutoff_date(self) -> dt.date | None:
        return parse_day(self.cutoff) if self.cutoff is not None else None

    @property
    def date_range(self) -> tuple[dt.date | None, dt.date | None] | None:
        if self.start is None and self.end is None:
            return None
        lo = parse_day(self.start) if self.start is not None else None
        hi = parse_day(self.end) if self.end is not None else None
        if lo is not None and hi is not None and lo > hi:
            raise ConfigError(f"empty date range: {lo} > {hi}")
        return lo, hi

    @property
    def wants_json(self) -> bool:
        # artifact richness ladder: csv < json < svg
        return self.format in ("json", "svg")

    @property
    def wants_svg(self) -> bool:
        return self.format == "svg"


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(values) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(
            f"{path}: unknown config key(s) {unknown}; valid: {sorted(_FIELD_NAMES)}"
        )
    return values


def build_config(config_path: str | Path | None, overrides: dict) -> RunConfig:
    """Defaults, overlaid with the config file, overlaid with flags.

    ``overrides`` holds flag values; None entries mean "flag not given"
    and never mask a file value.
    """
    values: dict = {}
    if config_path is not None:
        values.update(load_config_file(config_path))
    for name, value in overrides.items():
        if value is None:
            continue
        if name not in _FIELD_NAMES:
            raise ConfigError(f"unknown config override {name!r}")
        values[name] = value
    return RunConfig(**values)
