"""Run configuration: defaults, validation, and the config file format.

The file format is a versioned ``key = value`` text file.  Unknown keys
are rejected so that a frozen config snapshot stays unambiguous; every
effective value can be printed back with ``dump_text``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import UsageError
from .profiles import MINUTES_PER_DAY, Scale

CONFIG_VERSION = 1

DEFAULT_GAMMA = 0.10
DEFAULT_ORDER = 3


@dataclass
class RunConfig:
    gamma: float = DEFAULT_GAMMA
    k_initial: int = 8
    k_max: int = 4096
    # optional per-scale overrides of k_initial; the year level usually
    # wants far fewer starting clusters than the day level
    k_initial_day: int | None = None
    k_initial_week: int | None = None
    k_initial_year: int | None = None
    order_l: int = DEFAULT_ORDER
    n_bins: int = 32
    seed: int = 0
    interval_minutes: int = 15
    max_gap: int = 4
    logit_lambda: float = 1e-3
    anchor_weekday: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (0 < self.gamma):
            raise UsageError(f"gamma must be > 0, got {self.gamma}")
        if self.k_initial < 1:
            raise UsageError(f"k_initial must be >= 1, got {self.k_initial}")
        if self.k_max < self.k_initial:
            raise UsageError(f"k_max={self.k_max} below k_initial={self.k_initial}")
        for name in ("k_initial_day", "k_initial_week", "k_initial_year"):
            value = getattr(self, name)
            if value is not None and not (1 <= value <= self.k_max):
                raise UsageError(f"{name}={value} outside [1, k_max={self.k_max}]")
        if self.order_l < 1:
            raise UsageError(f"order_l must be >= 1, got {self.order_l}")
        if self.n_bins < 1:
            raise UsageError(f"n_bins must be >= 1, got {self.n_bins}")
        if self.seed < 0:
            raise UsageError(f"seed must be >= 0, got {self.seed}")
        if self.interval_minutes < 1 or MINUTES_PER_DAY % self.interval_minutes != 0:
            raise UsageError(
                f"interval_minutes={self.interval_minutes} must divide a day"
            )
        if self.max_gap < 0:
            raise UsageError(f"max_gap must be >= 0, got {self.max_gap}")
        if self.logit_lambda < 0:
            raise UsageError(f"logit_lambda must be >= 0, got {self.logit_lambda}")
        if self.anchor_weekday is not None and not (0 <= self.anchor_weekday <= 6):
            raise UsageError("anchor_weekday must be 0 (Monday) .. 6 (Sunday)")

    def k_initial_for(self, scale: Scale) -> int:
        override = {
            Scale.DAY: self.k_initial_day,
            Scale.WEEK: self.k_initial_week,
            Scale.YEAR: self.k_initial_year,
        }[scale]
        return self.k_initial if override is None else override

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def dump_text(self) -> str:
        lines = [f"config_version = {CONFIG_VERSION}"]
        for name, value in self.to_dict().items():
            lines.append(f"{name} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"


_INT_FIELDS = {
    "k_initial", "k_max", "k_initial_day", "k_initial_week", "k_initial_year",
    "order_l", "n_bins", "seed", "interval_minutes", "max_gap", "anchor_weekday",
}
_FLOAT_FIELDS = {"gamma", "logit_lambda"}
_OPTIONAL_FIELDS = {"k_initial_day", "k_initial_week", "k_initial_year", "anchor_weekday"}


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    values: dict = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {line_number}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key == "config_version":
            if value != str(CONFIG_VERSION):
                raise UsageError(
                    f"unsupported config_version {value!r}; this build reads version {CONFIG_VERSION}"
                )
            continue
        if key in _INT_FIELDS:
            if key in _OPTIONAL_FIELDS and value.lower() == "none":
                values[key] = None
                continue
            try:
                values[key] = int(value)
            except ValueError:
                raise UsageError(f"config line {line_number}: {key} wants an integer") from None
        elif key in _FLOAT_FIELDS:
            try:
                values[key] = float(value)
            except ValueError:
                raise UsageError(f"config line {line_number}: {key} wants a number") from None
        else:
            raise UsageError(f"config line {line_number}: unknown key {key!r}")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, overrides)
