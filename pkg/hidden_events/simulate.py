# MIT License

# Copyright (c) 2024 hidden-events developers

# Simulation
# ..................................................................................................................
# ..................................................................................................................

import datetime as dt
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .calendars import (
    DEFAULT_ORIGIN,
    DateLike,
    HolidayCalendar,
    default_calendar,
    exact_scenario_spec,
    parse_date,
    to_datetime64,
    to_index,
    weekday_codes,
)
from .counts import CountTriangle, EventDataset, actual_hidden_count, triangle_from_events
from .errors import ConfigError
from .timechange import ExposureModel, TimeChangedDistribution

SCENARIOS = ("baseline", "volatile", "low-frequency", "online-reporting")

SCALES = {
    "desk": {"intensity": 20.0, "bad": 80.0, "low": 2.0, "start": "2001-09-01", "end": "2004-09-05"},
    "full": {"intensity": 100.0, "bad": 400.0, "low": 2.0, "start": "1998-01-01", "end": "2004-09-05"},
}

ONLINE_REPORTING_LAUNCH = dt.date(2003, 1, 1)

# good -> good, good -> bad; bad -> good, bad -> bad
DEFAULT_TRANSITION = ((0.9, 0.1), (0.6, 0.4))


@dataclass(frozen=True)
class ExposureFormula:

    """

    Scenario exposure base * light^(Sat + unofficial holiday) * heavy^(Sun + national holiday).

    Examples:
        >>> formula = ExposureFormula(0.10, 0.20, 0.01)
        >>> [round(a, 6) for a in formula([0, 5, 6], [0, 0, 1]).tolist()]
        [0.1, 0.02, 1e-05]

    """

    base: float = 0.10
    light: float = 0.20
    heavy: float = 0.01

    def __post_init__(self):
        for name in ("base", "light", "heavy"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ConfigError(f"exposure multiplier {name} must lie in (0, 1], got {value}")

    def __call__(self, weekdays, holidays) -> np.ndarray:
        weekdays = np.asarray(weekdays)
        holidays = np.asarray(holidays)
        n_light = (weekdays == 5).astype(int) + (holidays == 2)
        n_heavy = (weekdays == 6).astype(int) + (holidays == 1)
        return self.base * self.light ** n_light * self.heavy ** n_heavy

    def to_dict(self) -> Dict:
        return {"base": self.base, "light": self.light, "heavy": self.heavy}


@dataclass(frozen=True)
class ScenarioConfig:

    """

    One simulated portfolio: occurrence process, time-changed delay and exposure formula.

    Args:
        name: one of SCENARIOS, or a free label
        start: first occurrence date
        end: last occurrence date (the computation date of the analyses)
        intensity: daily occurrence intensity (of the good state when volatile)
        bad_intensity: intensity of the bad state; None for a constant intensity
        transition: two-state Markov transition matrix, rows good and bad
        delay: law of the time-changed delay
        exposure: exposure formula
        breakpoint: reporting date from which post_exposure applies
        post_exposure: exposure formula on and after the breakpoint
        seed: random seed
        origin: date of day index 1

    """

    name: str
    start: dt.date
    end: dt.date
    intensity: float
    bad_intensity: Optional[float] = None
    transition: Tuple[Tuple[float, float], Tuple[float, float]] = DEFAULT_TRANSITION
    delay: TimeChangedDistribution = field(
        default_factory=lambda: TimeChangedDistribution("lognormal", 1.0)
    )
    exposure: ExposureFormula = field(default_factory=ExposureFormula)
    breakpoint: Optional[dt.date] = None
    post_exposure: Optional[ExposureFormula] = None
    seed: int = 0
    origin: dt.date = DEFAULT_ORIGIN

    def __post_init__(self):
        object.__setattr__(self, "start", parse_date(self.start))
        object.__setattr__(self, "end", parse_date(self.end))
        object.__setattr__(self, "origin", parse_date(self.origin))
        if self.breakpoint is not None:
            object.__setattr__(self, "breakpoint", parse_date(self.breakpoint))
        if self.end < self.start:
            raise ConfigError("the scenario ends before it starts")
        if self.start < self.origin:
            raise ConfigError("the scenario starts before the calendar origin")
        intensities = [self.intensity] + ([] if self.bad_intensity is None else [self.bad_intensity])
        if any(not (np.isfinite(lam) and lam > 0) for lam in intensities):
            raise ConfigError("occurrence intensities must be positive")
        matrix = np.asarray(self.transition, dtype=float)
        if matrix.shape != (2, 2) or np.any(matrix < 0) or not np.allclose(matrix.sum(axis=1), 1.0):
            raise ConfigError("the transition matrix must be 2x2 with rows summing to 1")
        if (self.breakpoint is None) != (self.post_exposure is None):
            raise ConfigError("a breakpoint needs a post-breakpoint exposure formula and vice versa")
        if self.seed < 0:
            raise ConfigError("the seed must be non-negative")

    @property
    def first_day(self) -> int:
        return to_index(self.start, self.origin)

    @property
    def last_day(self) -> int:
        return to_index(self.end, self.origin)

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.first_day, self.last_day + 1, dtype=np.int64)

    @property
    def volatile(self) -> bool:
        return self.bad_intensity is not None

    def stationary_intensity(self) -> float:
        """Long-run mean daily intensity."""
        if not self.volatile:
            return self.intensity
        p_good_bad, p_bad_good = self.transition[0][1], self.transition[1][0]
        pi_good = p_bad_good / (p_good_bad + p_bad_good)
        return pi_good * self.intensity + (1 - pi_good) * self.bad_intensity

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "start": self.start,
            "end": self.end,
            "intensity": self.intensity,
            "bad_intensity": self.bad_intensity,
            "transition": [list(row) for row in self.transition],
            "delay": self.delay.to_dict(),
            "exposure": self.exposure.to_dict(),
            "breakpoint": self.breakpoint,
            "post_exposure": None if self.post_exposure is None else self.post_exposure.to_dict(),
            "seed": self.seed,
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "ScenarioConfig":
        return cls(
            name=d["name"],
            start=d["start"],
            end=d["end"],
            intensity=float(d["intensity"]),
            bad_intensity=None if d.get("bad_intensity") is None else float(d["bad_intensity"]),
            transition=tuple(tuple(row) for row in d.get("transition", DEFAULT_TRANSITION)),
            delay=TimeChangedDistribution.from_dict(d["delay"]),
            exposure=ExposureFormula(**d["exposure"]),
            breakpoint=d.get("breakpoint"),
            post_exposure=None if d.get("post_exposure") is None else ExposureFormula(**d["post_exposure"]),
            seed=int(d.get("seed", 0)),
            origin=d.get("origin", DEFAULT_ORIGIN),
        )


def scenario_config(
    name: str,
    scale: str = "desk",
    seed: int = 0,
    delay: Optional[TimeChangedDistribution] = None,
    start: Optional[DateLike] = None,
    end: Optional[DateLike] = None,
    origin: DateLike = DEFAULT_ORIGIN,
) -> ScenarioConfig:

    """

    One of the four reference scenarios.

    Args:
        name: 'baseline', 'volatile', 'low-frequency' or 'online-reporting'
        scale: 'desk' (20 events a day from September 2001) or 'full' (100 a day from 1998)
        seed: random seed
        delay: law of the time-changed delay (default lognormal with sigma 1)
        start: first occurrence date, overriding the scale's
        end: last occurrence date, overriding the scale's

    Examples:
        >>> cfg = scenario_config("volatile")
        >>> cfg.intensity, cfg.bad_intensity, round(cfg.stationary_intensity(), 4)
        (20.0, 80.0, 28.5714)
        >>> str(scenario_config("online-reporting", "full").breakpoint)
        '2003-01-01'

    """

    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}, expected one of {SCENARIOS}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}, expected one of {tuple(SCALES)}")
    params = SCALES[scale]
    kwargs = dict(
        name=name,
        start=start or params["start"],
        end=end or params["end"],
        intensity=params["intensity"],
        delay=delay or TimeChangedDistribution("lognormal", 1.0),
        seed=seed,
        origin=origin,
    )
    if name == "volatile":
        kwargs["bad_intensity"] = params["bad"]
    elif name == "low-frequency":
        kwargs["intensity"] = params["low"]
    elif name == "online-reporting":
        kwargs["breakpoint"] = ONLINE_REPORTING_LAUNCH
        kwargs["post_exposure"] = ExposureFormula(0.10, 0.50, 0.20)
    return ScenarioConfig(**kwargs)


def scenario_exposure(cfg: ScenarioConfig, s, cal: HolidayCalendar) -> np.ndarray:
    """Daily exposure of the reporting dates s, which only depends on the reporting date."""
    s = np.atleast_1d(np.asarray(s, dtype=np.int64))
    weekdays = weekday_codes(s, cal.origin)
    holidays = cal.holiday_codes(s)
    alpha = cfg.exposure(weekdays, holidays)
    if cfg.breakpoint is not None:
        post = s >= to_index(cfg.breakpoint, cal.origin)
        alpha = np.where(post, cfg.post_exposure(weekdays, holidays), alpha)
    return alpha


def exact_scenario_model(cfg: ScenarioConfig) -> ExposureModel:

    """

    The scenario's exposure formula as an exposure model on exact_scenario_spec.

    Weekdays and days without a holiday are the reference levels; the intercept carries
    the base exposure.

    """

    spec = exact_scenario_spec(cfg.breakpoint)
    log_multiplier = {
        "rep_weekend[Sat]": "light",
        "rep_weekend[Sun]": "heavy",
        "rep_holiday[unofficial]": "light",
        "rep_holiday[national]": "heavy",
    }
    gamma = []
    for name in spec.column_names:
        if name == "intercept":
            gamma.append(np.log(cfg.exposure.base))
            continue
        inner, _, side = name.partition("|")
        formula = cfg.post_exposure if side.startswith("s>=") else cfg.exposure
        gamma.append(np.log(getattr(formula, log_multiplier[inner])))
    return ExposureModel(spec, np.asarray(gamma))


# Generator
# ..................................................................................................................

# Streams: SeedSequence([seed, 0]) draws the occurrence counts, SeedSequence([seed, 1, t])
# the delays of occurrence date t, so the output does not depend on the worker count.


def _generator(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def occurrence_generator(cfg: ScenarioConfig) -> np.random.Generator:
    return _generator(cfg.seed, 0)


def delay_generator(cfg: ScenarioConfig, t: int) -> np.random.Generator:
    return _generator(cfg.seed, 1, int(t))


def markov_states(cfg: ScenarioConfig, rng: np.random.Generator, n_days: int) -> np.ndarray:
    """State path of the two-state chain (0 good, 1 bad), starting in the good state."""
    draws = rng.random(n_days)
    states = np.zeros(n_days, dtype=np.int64)
    for i in range(1, n_days):
        stay_good = cfg.transition[states[i - 1]][0]
        states[i] = 0 if draws[i] < stay_good else 1
    return states


def simulate_occurrences(cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None) -> pd.Series:

    """

    Daily occurrence counts N_t ~ Poisson(lambda_t), indexed by day index.

    Examples:
        >>> cfg = scenario_config("baseline", start="2003-01-01", end="2003-01-10")
        >>> counts = simulate_occurrences(cfg)
        >>> len(counts), bool(counts.index[0] == cfg.first_day)
        (10, True)

    """

    rng = rng or occurrence_generator(cfg)
    days = cfg.days
    if cfg.volatile:
        states = markov_states(cfg, rng, len(days))
        lam = np.where(states == 0, cfg.intensity, cfg.bad_intensity)
    else:
        lam = np.full(len(days), cfg.intensity)
    return pd.Series(rng.poisson(lam), index=days, name="n_events")


def observation_delay(u, alphas) -> np.ndarray:

    """

    Smallest delay d with alpha_0 + ... + alpha_d > u; len(alphas) when the exposures run out.

    Examples:
        >>> int(observation_delay(2.5, np.ones(10)))
        2
        >>> int(observation_delay(0.05, [0.1, 0.1]))
        0

    """

    return np.searchsorted(np.cumsum(np.asarray(alphas, dtype=float)), u, side="right")


class ExposurePath:

    """

    Cumulative scenario exposure over consecutive reporting dates, extended on demand.

    """

    def __init__(self, cfg: ScenarioConfig, cal: HolidayCalendar, first_day: int, length: int):
        self.cfg = cfg
        self.cal = cal
        self.first_day = first_day
        self.cumulative = np.concatenate(
            [[0.0], np.cumsum(scenario_exposure(cfg, np.arange(first_day, first_day + length), cal))]
        )

    @property
    def last_day(self) -> int:
        return self.first_day + len(self.cumulative) - 2

    def extend(self):
        length = len(self.cumulative) - 1
        more = scenario_exposure(self.cfg, np.arange(self.last_day + 1, self.last_day + 1 + length), self.cal)
        self.cumulative = np.concatenate([self.cumulative, self.cumulative[-1] + np.cumsum(more)])

    def observation_days(self, t: int, u: np.ndarray) -> np.ndarray:
        """First reporting dates whose exposure accumulated since t exceeds the draws u."""
        if t < self.first_day:
            raise ValueError("occurrence date before the exposure path")
        target = self.cumulative[t - self.first_day] + np.asarray(u, dtype=float)
        while len(target) and target.max() >= self.cumulative[-1]:
            self.extend()
        k = np.searchsorted(self.cumulative, target, side="right")
        return self.first_day + k - 1


def simulate_observation_date(
    t: int, cfg: ScenarioConfig, rng: np.random.Generator, cal: Optional[HolidayCalendar] = None
) -> int:
    """Observation date of one event occurred on t."""
    cal = cal or default_calendar(cfg.origin)
    u = cfg.delay.sample(rng, 1)
    return int(ExposurePath(cfg, cal, t, 64).observation_days(t, u)[0])


def simulate_delays(
    cfg: ScenarioConfig, days: np.ndarray, counts: np.ndarray, cal: HolidayCalendar, path_length: int = 3650
) -> Tuple[np.ndarray, np.ndarray]:
    """Occurrence and observation dates of the events of the given occurrence dates."""
    if len(days) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    path = ExposurePath(cfg, cal, int(days[0]), int(days[-1] - days[0]) + path_length)
    occurrence, observation = [], []
    for t, n in zip(days, counts):
        u = cfg.delay.sample(delay_generator(cfg, t), int(n))
        occurrence.append(np.full(int(n), t, dtype=np.int64))
        observation.append(path.observation_days(int(t), u))
    return np.concatenate(occurrence), np.concatenate(observation).astype(np.int64)


@dataclass(eq=False)
class SimulatedDataset:

    """

    All events of a simulated portfolio with their true observation dates.

    """

    config: ScenarioConfig
    events: EventDataset
    occurrences: pd.Series

    def split(self, eval_date: int, computation_date: Optional[int] = None) -> Tuple[CountTriangle, int]:
        """The triangle observed at the computation date and the actual hidden count at eval_date."""
        computation_date = eval_date if computation_date is None else computation_date
        if computation_date < eval_date:
            raise ValueError("the computation date precedes the evaluation date")
        return (
            triangle_from_events(self.events, computation_date),
            actual_hidden_count(self.events, eval_date),
        )

    def to_frame(self) -> pd.DataFrame:
        return self.events.to_frame()


def simulate_scenario(
    cfg: ScenarioConfig,
    cal: Optional[HolidayCalendar] = None,
    n_jobs: int = 1,
    chunk_size: int = 256,
    progress_bar: bool = False,
) -> SimulatedDataset:

    """

    Simulate every occurrence date of a scenario and the observation date of every event.

    Counts come from simulate_occurrences; the delay of an event occurred on t is the first
    reporting date at which the exposure accumulated since t exceeds a draw of the
    time-changed delay. Results are identical for any n_jobs.

    Args:
        cfg: scenario configuration
        cal: holiday calendar (default: packaged Dutch calendar)
        n_jobs: number of parallel workers over chunks of occurrence dates
        chunk_size: occurrence dates per job
        progress_bar: print a progress bar (default is False)

    """

    cal = cal or default_calendar(cfg.origin)
    if cal.origin != cfg.origin:
        raise ConfigError("the calendar and the scenario use different origins")
    counts = simulate_occurrences(cfg)
    days = counts.index.to_numpy()
    chunks = [slice(i, i + chunk_size) for i in range(0, len(days), chunk_size)]
    if progress_bar:
        print("Simulating scenario %s..." % cfg.name)
        chunks = tqdm(chunks)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(simulate_delays)(cfg, days[chunk], counts.to_numpy()[chunk], cal) for chunk in chunks
    )
    events = EventDataset.from_days(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        cfg.origin,
    )
    return SimulatedDataset(cfg, events, counts)


def rolling_hidden_counts(events: EventDataset, dates: Sequence[int]) -> pd.Series:

    """

    Actual hidden count at each date: events occurred by it and observed after it.

    Examples:
        >>> events = EventDataset.from_days([1, 1, 2, 3], [1, 4, 5, 3])
        >>> rolling_hidden_counts(events, [1, 2, 3, 4, 5]).tolist()
        [1, 2, 2, 1, 0]

    """

    dates = np.asarray(dates, dtype=np.int64)
    occurred = np.searchsorted(np.sort(events.occurrence), dates, side="right")
    observed = np.searchsorted(np.sort(events.observation), dates, side="right")
    return pd.Series(
        occurred - observed,
        index=pd.DatetimeIndex(to_datetime64(dates, events.origin), name="date"),
        name="hidden",
    )
