# MIT License

# Copyright (c) 2024 hidden-events developers

# Run configuration
# ..................................................................................................................
# ..................................................................................................................

import configparser
import datetime as dt
import os
from typing import Dict, List, Optional, Sequence, Tuple

from .binning import BinningOptions, DelayBins
from .calendars import (
    DEFAULT_ORIGIN,
    CovariateSpec,
    HolidayCalendar,
    default_calendar,
    load_holidays,
    make_spec,
    parse_date,
    to_index,
)
from .errors import ConfigError
from .likelihood import FitOptions
from .simulate import SCALES, SCENARIOS, ScenarioConfig, scenario_config
from .timechange import MAX_HORIZON, TAIL_TOLERANCE, TimeChangedDistribution
from .utils import config_hash

SCHEMA_VERSION = 1

SECTIONS = ("data", "model", "fit", "bins", "predict", "backtest", "scenario", "chainladder", "output")

# sections each command reads; the first ones are required
COMMAND_SECTIONS = {
    "simulate": (("scenario",), ("output",)),
    "fit": (("data", "predict"), ("model", "fit", "bins", "output")),
    "bins": (("data", "predict"), ("bins", "output")),
    "predict": (("data", "predict"), ("model", "fit", "bins", "output")),
    "backtest": ((), ("data", "model", "fit", "bins", "backtest", "scenario", "predict", "output")),
    "chainladder": (("data", "chainladder"), ("output",)),
}

SIX_EFFECTS = "intercept, occ_dom, occ_month, rep_holiday, rep_month, rep_dow_first_week, delay"

DEFAULT_STUDY_DATES = (dt.date(2003, 12, 31), dt.date(2004, 8, 31))


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.replace("\n", ",").split(",") if item.strip()]


class RunConfig:

    """

    INI run configuration with typed accessors.

    Sections: [data] [model] [fit] [bins] [predict] [backtest] [scenario] [chainladder]
    [output]. Every accessor raises ConfigError on a missing or malformed value.

    Examples:
        >>> cfg = RunConfig.from_string("[predict]\\neval_date = 2004-08-31\\n")
        >>> cfg.date("predict", "eval_date")
        datetime.date(2004, 8, 31)
        >>> cfg.get_float("fit", "gradient_tolerance", 1e-6)
        1e-06

    """

    def __init__(self, parser: configparser.ConfigParser, base_dir: str = "."):
        unknown = [s for s in parser.sections() if s not in SECTIONS]
        if unknown:
            raise ConfigError(f"unknown configuration section(s): {unknown}")
        self.parser = parser
        self.base_dir = base_dir

    @classmethod
    def from_string(cls, text: str, base_dir: str = ".") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise ConfigError(f"unreadable configuration: {err}")
        return cls(parser, base_dir)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        if not os.path.exists(path):
            raise ConfigError(f"configuration file not found: {path}")
        with open(path) as f:
            return cls.from_string(f.read(), os.path.dirname(os.path.abspath(path)))

    # canonical form

    def canonical_text(self) -> str:
        lines = []
        for section in sorted(self.parser.sections()):
            lines.append(f"[{section}]")
            for key, value in sorted(self.parser.items(section)):
                lines.append(f"{key} = {' '.join(value.split())}")
        return "\n".join(lines)

    def hash(self, seed: Optional[int]) -> str:
        return config_hash(self.canonical_text(), seed)

    def has(self, section: str) -> bool:
        return self.parser.has_section(section)

    def require(self, command: str):
        if command not in COMMAND_SECTIONS:
            raise ConfigError(f"unknown command {command!r}")
        required, optional = COMMAND_SECTIONS[command]
        missing = [s for s in required if not self.has(s)]
        if missing:
            raise ConfigError(f"the {command} command needs the section(s) {missing}")
        extra = [s for s in self.parser.sections() if s not in required + optional]
        if extra:
            raise ConfigError(f"section(s) {extra} are not used by the {command} command")
        if command == "backtest" and not (self.has("scenario") or self.has("data")):
            raise ConfigError("the backtest command needs a [data] or a [scenario] section")

    # typed accessors

    def get(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return default

    def require_value(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None or value == "":
            raise ConfigError(f"[{section}] {key} is required")
        return value

    def _convert(self, section: str, key: str, default, convert):
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return convert(value)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key}: cannot parse {value!r}")

    def get_int(self, section: str, key: str, default: Optional[int] = None) -> Optional[int]:
        return self._convert(section, key, default, int)

    def get_float(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        return self._convert(section, key, default, float)

    def get_bool(self, section: str, key: str, default: bool = False) -> bool:
        if self.get(section, key) is None:
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected a boolean")

    def get_list(self, section: str, key: str, default: Sequence[str] = ()) -> List[str]:
        value = self.get(section, key)
        return list(default) if value is None else _split(value)

    def date(self, section: str, key: str, default: Optional[dt.date] = None) -> Optional[dt.date]:
        return self._convert(section, key, default, parse_date)

    def dates(self, section: str, key: str) -> List[dt.date]:
        try:
            return [parse_date(v) for v in self.get_list(section, key)]
        except ValueError as err:
            raise ConfigError(f"[{section}] {key}: {err}")

    def path(self, section: str, key: str) -> Optional[str]:
        value = self.get(section, key)
        if value is None:
            return None
        path = value if os.path.isabs(value) else os.path.join(self.base_dir, value)
        if not os.path.exists(path):
            raise ConfigError(f"[{section}] {key}: file not found: {path}")
        return path

    # domain objects

    @property
    def origin(self) -> dt.date:
        return self.date("data", "origin", DEFAULT_ORIGIN)

    def calendar(self) -> HolidayCalendar:
        path = self.path("data", "holidays")
        if path is None:
            return default_calendar(self.origin)
        return load_holidays(path, self.origin)

    def distribution(self) -> TimeChangedDistribution:
        kind = self.get("model", "distribution", "exponential")
        sigma = self.get_float("model", "sigma", 1.0)
        try:
            return TimeChangedDistribution(kind, sigma)
        except ValueError as err:
            raise ConfigError(f"[model] {err}")

    def delay_bins(self) -> Optional[DelayBins]:
        """Explicit bins, or None when they are to be proposed from the data ('auto')."""
        value = self.get("model", "delay_bins", "auto")
        if value == "auto":
            return None
        try:
            return DelayBins(tuple(int(v) for v in _split(value)))
        except ValueError as err:
            raise ConfigError(f"[model] delay_bins: {err}")

    def effects(self) -> List[str]:
        return self.get_list("model", "effects", _split(SIX_EFFECTS))

    def covariate_spec(self, bins: Optional[DelayBins]) -> CovariateSpec:
        breakpoint = self.date("model", "breakpoint")
        try:
            return make_spec(
                self.effects(),
                delay_bins=None if bins is None else bins.starts,
                breakpoint=breakpoint,
                breakpoint_effects=self.get_list("model", "breakpoint_effects"),
            )
        except ValueError as err:
            raise ConfigError(f"[model] {err}")

    def fit_options(self) -> FitOptions:
        defaults = FitOptions()
        try:
            return FitOptions(
                max_iterations=self.get_int("fit", "max_iterations", defaults.max_iterations),
                gradient_tolerance=self.get_float("fit", "gradient_tolerance", defaults.gradient_tolerance),
                step_tolerance=self.get_float("fit", "step_tolerance", defaults.step_tolerance),
                ridge_floor=self.get_float("fit", "ridge_floor", defaults.ridge_floor),
                ridge_max=self.get_float("fit", "ridge_max", defaults.ridge_max),
                step_halving_max=self.get_int("fit", "step_halving_max", defaults.step_halving_max),
                boundary_bound=self.get_float("fit", "boundary_bound", defaults.boundary_bound),
                max_batch_size=self.get_int("fit", "max_batch_size", defaults.max_batch_size),
            )
        except ValueError as err:
            raise ConfigError(f"[fit] {err}")

    def truncation(self) -> bool:
        return self.get_bool("fit", "truncation", True)

    def level(self) -> float:
        level = self.get_float("fit", "level", 0.95)
        if not 0 < level < 1:
            raise ConfigError("[fit] level must lie in (0, 1)")
        return level

    def binning_options(self) -> BinningOptions:
        defaults = BinningOptions()
        try:
            return BinningOptions(
                threshold=self.get_float("bins", "threshold", defaults.threshold),
                growth=self.get_float("bins", "growth", defaults.growth),
                spike_factor=self.get_float("bins", "spike_factor", defaults.spike_factor),
                min_singleton=self.get_int("bins", "min_singleton", defaults.min_singleton),
                tail_fraction=self.get_float("bins", "tail_fraction", defaults.tail_fraction),
            )
        except ValueError as err:
            raise ConfigError(f"[bins] {err}")

    def prediction_dates(self) -> Tuple[int, int, Optional[int]]:
        """Evaluation date, computation date and horizon date as day indices."""
        eval_date = self.date("predict", "eval_date")
        if eval_date is None:
            raise ConfigError("[predict] eval_date is required")
        computation = self.date("predict", "computation_date", eval_date)
        if computation < eval_date:
            raise ConfigError("[predict] computation_date precedes eval_date")
        horizon_value = self.get("predict", "horizon", "none")
        horizon = None if horizon_value.lower() in ("none", "") else self.date("predict", "horizon")
        origin = self.origin
        return (
            to_index(eval_date, origin),
            to_index(computation, origin),
            None if horizon is None else to_index(horizon, origin),
        )

    def prediction_options(self) -> Dict:
        return {
            "max_horizon": self.get_int("predict", "max_horizon", MAX_HORIZON),
            "tail_tolerance": self.get_float("predict", "tail_tolerance", TAIL_TOLERANCE),
            "reliability_floor": self.get_float("predict", "reliability_floor", 1e-4),
        }

    def backtest_dates(self) -> List[dt.date]:
        """Explicit eval_dates, or every step days from start to end."""
        if self.get("backtest", "eval_dates") is not None:
            return self.dates("backtest", "eval_dates")
        start, end = self.date("backtest", "start"), self.date("backtest", "end")
        if start is None or end is None:
            raise ConfigError("[backtest] needs eval_dates, or start and end")
        step = self.get_int("backtest", "step", 1)
        if step < 1 or end < start:
            raise ConfigError("[backtest] step must be positive and end must not precede start")
        return [start + dt.timedelta(days=k) for k in range(0, (end - start).days + 1, step)]

    def backtest_options(self) -> Dict:
        gap = self.get_int("backtest", "gap", 5)
        refit_every = self.get_int("backtest", "refit_every", 1)
        horizon = self.get_int("backtest", "horizon_days")
        if gap < 0 or refit_every < 1 or (horizon is not None and horizon < 1):
            raise ConfigError("[backtest] gap must be >= 0, refit_every >= 1, horizon_days >= 1")
        return {"gap": gap, "refit_every": refit_every, "horizon": horizon}

    def seed(self, override: Optional[int] = None) -> int:
        if override is not None:
            return override
        return self.get_int("scenario", "seed", 0)

    def scenario(self, seed: Optional[int] = None) -> ScenarioConfig:
        name = self.require_value("scenario", "name")
        scale = self.get("scenario", "scale", "desk")
        if name not in SCENARIOS:
            raise ConfigError(f"[scenario] name should be one of {SCENARIOS}")
        if scale not in SCALES:
            raise ConfigError(f"[scenario] scale should be one of {tuple(SCALES)}")
        kind = self.get("scenario", "delay", "lognormal")
        try:
            delay = TimeChangedDistribution(kind, self.get_float("scenario", "sigma", 1.0))
        except ValueError as err:
            raise ConfigError(f"[scenario] {err}")
        return scenario_config(
            name,
            scale,
            self.seed(seed),
            delay,
            start=self.date("scenario", "start"),
            end=self.date("scenario", "end"),
            origin=self.origin,
        )

    def scenario_study_options(self) -> Dict:
        models = self.get_list("scenario", "models", ("exact", "approximate", "chainladder"))
        unknown = [m for m in models if m not in ("exact", "approximate", "chainladder")]
        if unknown:
            raise ConfigError(f"[scenario] unknown model(s) {unknown}")
        replications = self.get_int("scenario", "replications", 30)
        if replications < 1:
            raise ConfigError("[scenario] replications must be at least 1")
        return {
            "replications": replications,
            "eval_dates": self.dates("scenario", "eval_dates") or list(DEFAULT_STUDY_DATES),
            "models": models,
        }

    def chainladder_options(self) -> Dict:
        period_length = self.get("chainladder", "period_length", "year")
        anchor_text = self.get("chainladder", "anchor", "01-01")
        try:
            month, day = (int(v) for v in anchor_text.split("-"))
        except ValueError:
            raise ConfigError(f"[chainladder] anchor: expected MM-DD, got {anchor_text!r}")
        return {
            "eval_date": self.date("chainladder", "eval_date"),
            "period_length": period_length,
            "anchor": (month, day),
        }

    def output_dir(self, override: Optional[str] = None) -> str:
        if override is not None:
            return override
        return self.get("output", "directory", "out")
