# MIT License

# Copyright (c) 2024 hidden-events developers

# Calendars and covariates
# ..................................................................................................................
# ..................................................................................................................

import datetime as dt
import os
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from dateutil.easter import easter

from .errors import ConfigError, DataError

WEEKDAYS = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]
MONTHS = [
    "Jan",
    "Feb",
    "Mar",
    "Apr",
    "May",
    "Jun",
    "Jul",
    "Aug",
    "Sep",
    "Oct",
    "Nov",
    "Dec",
]
HOLIDAY_CLASSES = ["none", "national", "unofficial"]

DEFAULT_ORIGIN = dt.date(1996, 1, 1)
DEFAULT_HOLIDAY_FILE = os.path.join(os.path.dirname(__file__), "data", "holidays_nl.csv")

DateLike = Union[str, dt.date, np.datetime64]


def parse_date(value: DateLike) -> dt.date:

    """

    Coerce an ISO string, a date, a datetime or a numpy datetime64 to a date.

    Examples:
        >>> parse_date("2004-08-31")
        datetime.date(2004, 8, 31)
        >>> parse_date(np.datetime64("2003-01-01"))
        datetime.date(2003, 1, 1)

    """

    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]").item()
    if hasattr(value, "date") and callable(value.date):
        return value.date()
    try:
        return dt.date.fromisoformat(str(value).strip())
    except ValueError:
        raise ValueError(f"not an ISO-8601 date: {value!r}")


def to_index(date: DateLike, origin: dt.date = DEFAULT_ORIGIN) -> int:

    """

    Day index of a calendar date, the origin being day 1.

    Examples:
        >>> to_index("1996-01-01")
        1
        >>> to_index("1996-02-01")
        32

    """

    return (parse_date(date) - origin).days + 1


def to_date(day: int, origin: dt.date = DEFAULT_ORIGIN) -> dt.date:

    """

    Calendar date of a day index.

    Examples:
        >>> to_date(32)
        datetime.date(1996, 2, 1)
        >>> to_date(to_index("2004-08-31"))
        datetime.date(2004, 8, 31)

    """

    return origin + dt.timedelta(days=int(day) - 1)


def to_datetime64(days, origin: dt.date = DEFAULT_ORIGIN) -> np.ndarray:
    days = np.asarray(days, dtype=np.int64)
    return np.datetime64(origin, "D") + (days - 1).astype("timedelta64[D]")


def weekday_codes(days, origin: dt.date = DEFAULT_ORIGIN) -> np.ndarray:
    """Weekday of day indices, Monday = 0."""
    days = np.asarray(days, dtype=np.int64)
    return (origin.weekday() + days - 1) % 7


def month_codes(days, origin: dt.date = DEFAULT_ORIGIN) -> np.ndarray:
    """Month of day indices, January = 0."""
    dates = to_datetime64(days, origin)
    return dates.astype("datetime64[M]").astype(np.int64) % 12


def day_of_month(days, origin: dt.date = DEFAULT_ORIGIN) -> np.ndarray:
    dates = to_datetime64(days, origin)
    month_start = dates.astype("datetime64[M]").astype("datetime64[D]")
    return (dates - month_start).astype(np.int64) + 1


def year_of(days, origin: dt.date = DEFAULT_ORIGIN) -> np.ndarray:
    dates = to_datetime64(days, origin)
    return dates.astype("datetime64[Y]").astype(np.int64) + 1970


def day_of_week(day: int, origin: dt.date = DEFAULT_ORIGIN) -> str:

    """

    Weekday label of a day index.

    Examples:
        >>> day_of_week(to_index("2004-08-31"))
        'Tue'
        >>> day_of_week(to_index("2007-01-18"))
        'Thu'
        >>> day_of_week(100) == day_of_week(107)
        True

    """

    return WEEKDAYS[int(weekday_codes(day, origin))]


# Holiday calendars
# ..................................................................................................................


@dataclass(frozen=True)
class HolidayCalendar:

    """

    National and unofficial holidays, plus the origin date that day indices refer to.

    """

    national: FrozenSet[dt.date] = frozenset()
    unofficial: FrozenSet[dt.date] = frozenset()
    origin: dt.date = DEFAULT_ORIGIN

    def __post_init__(self):
        object.__setattr__(self, "national", frozenset(parse_date(d) for d in self.national))
        object.__setattr__(self, "unofficial", frozenset(parse_date(d) for d in self.unofficial))
        overlap = self.national & self.unofficial
        if overlap:
            raise ValueError(
                f"national and unofficial holidays overlap: {sorted(overlap)[:5]}"
            )
        object.__setattr__(
            self,
            "_national64",
            np.array(sorted(self.national), dtype="datetime64[D]"),
        )
        object.__setattr__(
            self,
            "_unofficial64",
            np.array(sorted(self.unofficial), dtype="datetime64[D]"),
        )

    def with_origin(self, origin: DateLike) -> "HolidayCalendar":
        return HolidayCalendar(self.national, self.unofficial, parse_date(origin))

    def holiday_codes(self, days) -> np.ndarray:
        """Holiday class of day indices: 0 none, 1 national, 2 unofficial."""
        dates = to_datetime64(days, self.origin)
        codes = np.zeros(dates.shape, dtype=np.int64)
        codes[np.isin(dates, self._national64)] = 1
        codes[np.isin(dates, self._unofficial64)] = 2
        return codes


def holiday_class(day: int, cal: HolidayCalendar) -> str:

    """

    Holiday class ('none', 'national' or 'unofficial') of a day index.

    Examples:
        >>> cal = default_calendar()
        >>> holiday_class(to_index("2003-01-01"), cal)
        'national'
        >>> holiday_class(to_index("2003-12-31"), cal)
        'unofficial'
        >>> holiday_class(to_index("2003-06-11"), cal)
        'none'

    """

    return HOLIDAY_CLASSES[int(cal.holiday_codes(day))]


def dutch_calendar(
    first_year: int, last_year: int, origin: dt.date = DEFAULT_ORIGIN
) -> HolidayCalendar:

    """

    Dutch national holidays plus Good Friday and New Year's Eve as unofficial holidays.

    Queen's Day moves to April 29 when April 30 is a Sunday; Liberation Day is a national
    holiday in lustrum years only.

    Examples:
        >>> cal = dutch_calendar(2003, 2003)
        >>> sorted(d.isoformat() for d in cal.unofficial)
        ['2003-04-18', '2003-12-31']
        >>> len(cal.national)
        7

    """

    national = set()
    unofficial = set()
    for year in range(first_year, last_year + 1):
        easter_sunday = easter(year)
        national.add(dt.date(year, 1, 1))
        national.add(easter_sunday + dt.timedelta(days=1))
        queens_day = dt.date(year, 4, 30)
        if queens_day.weekday() == 6:
            queens_day = dt.date(year, 4, 29)
        national.add(queens_day)
        if year % 5 == 0:
            national.add(dt.date(year, 5, 5))
        national.add(easter_sunday + dt.timedelta(days=39))
        national.add(easter_sunday + dt.timedelta(days=50))
        national.add(dt.date(year, 12, 25))
        national.add(dt.date(year, 12, 26))
        unofficial.add(easter_sunday - dt.timedelta(days=2))
        unofficial.add(dt.date(year, 12, 31))
    return HolidayCalendar(frozenset(national), frozenset(unofficial), origin)


def load_holidays(path: str, origin: DateLike = DEFAULT_ORIGIN) -> HolidayCalendar:

    """

    Read a holiday file with lines 'YYYY-MM-DD,national|unofficial'; '#' starts a comment.

    """

    national = set()
    unofficial = set()
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [part.strip() for part in line.split(",")]
            if len(parts) != 2 or parts[1] not in ("national", "unofficial"):
                raise DataError(f"{path}:{line_number}: expected 'YYYY-MM-DD,national|unofficial'")
            try:
                date = parse_date(parts[0])
            except ValueError as err:
                raise DataError(f"{path}:{line_number}: {err}")
            (national if parts[1] == "national" else unofficial).add(date)
    try:
        return HolidayCalendar(frozenset(national), frozenset(unofficial), parse_date(origin))
    except ValueError as err:
        raise DataError(f"{path}: {err}")


def write_holidays(cal: HolidayCalendar, path: str):
    rows = [(d, "national") for d in cal.national] + [(d, "unofficial") for d in cal.unofficial]
    with open(path, "w", encoding="utf-8") as f:
        f.write("# date,class\n")
        for date, kind in sorted(rows):
            f.write(f"{date.isoformat()},{kind}\n")


def default_calendar(origin: DateLike = DEFAULT_ORIGIN) -> HolidayCalendar:
    """The packaged Dutch calendar covering 1996-2010."""
    return load_holidays(DEFAULT_HOLIDAY_FILE, origin)


# Covariate effects
# ..................................................................................................................

# Every effect maps a batch of (t, s) pairs to local column indices, one slot per
# encoded factor, with -1 for the reference level.


class Effect:

    kind = ""

    def levels(self) -> List[str]:
        raise NotImplementedError

    def reference(self) -> Optional[str]:
        raise NotImplementedError

    def column_names(self) -> List[str]:
        ref = self.reference()
        return [f"{self.kind}[{level}]" for level in self.levels() if level != ref]

    def reference_names(self) -> List[str]:
        ref = self.reference()
        return [] if ref is None else [f"{self.kind}[{ref}]"]

    @property
    def n_columns(self) -> int:
        return len(self.column_names())

    @property
    def n_slots(self) -> int:
        return 1

    def level_codes(self, t: np.ndarray, s: np.ndarray, cal: HolidayCalendar) -> np.ndarray:
        raise NotImplementedError

    def slot_columns(self, t: np.ndarray, s: np.ndarray, cal: HolidayCalendar) -> np.ndarray:
        levels = self.levels()
        ref = self.reference()
        column_of_level = np.full(len(levels), -1, dtype=np.int64)
        column = 0
        for i, level in enumerate(levels):
            if level != ref:
                column_of_level[i] = column
                column += 1
        return column_of_level[self.level_codes(t, s, cal)][:, None]

    def to_dict(self) -> Dict:
        return {"kind": self.kind}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class Intercept(Effect):

    kind = "intercept"

    def levels(self):
        return ["1"]

    def reference(self):
        return None

    def column_names(self):
        return ["intercept"]

    def level_codes(self, t, s, cal):
        return np.zeros(len(t), dtype=np.int64)


class OccurrenceDayOfMonth(Effect):

    kind = "occ_dom"

    def levels(self):
        return [str(d) for d in range(1, 32)]

    def reference(self):
        return "2"

    def level_codes(self, t, s, cal):
        return day_of_month(t, cal.origin) - 1


class OccurrenceMonth(Effect):

    kind = "occ_month"

    def levels(self):
        return list(MONTHS)

    def reference(self):
        return "Jan"

    def level_codes(self, t, s, cal):
        return month_codes(t, cal.origin)


class ReportingHoliday(Effect):

    kind = "rep_holiday"

    def levels(self):
        return list(HOLIDAY_CLASSES)

    def reference(self):
        return "none"

    def level_codes(self, t, s, cal):
        return cal.holiday_codes(s)


class ReportingMonth(Effect):

    kind = "rep_month"

    def levels(self):
        return list(MONTHS)

    def reference(self):
        return "Jan"

    def level_codes(self, t, s, cal):
        return month_codes(s, cal.origin)


class ReportingDayOfWeek(Effect):

    kind = "rep_dow"

    def levels(self):
        return list(WEEKDAYS)

    def reference(self):
        return "Mon"

    def level_codes(self, t, s, cal):
        return weekday_codes(s, cal.origin)


class ReportingWeekend(Effect):

    kind = "rep_weekend"

    def levels(self):
        return ["weekday", "Sat", "Sun"]

    def reference(self):
        return "weekday"

    def level_codes(self, t, s, cal):
        return np.maximum(weekday_codes(s, cal.origin) - 4, 0)


class ReportingDowFirstWeek(Effect):

    """

    Reporting weekday within delay classes 0, 1, ..., 6 and 7+ (pooled).

    Monday is the reference within every delay class, the delay main effect being
    carried by the delay bins.

    """

    kind = "rep_dow_first_week"

    def delay_classes(self) -> List[str]:
        return [str(d) for d in range(7)] + ["7+"]

    def levels(self):
        return [f"{dow}@{d}" for d in self.delay_classes() for dow in WEEKDAYS]

    def reference(self):
        return None

    def column_names(self):
        return [
            f"{self.kind}[{dow}@{d}]"
            for d in self.delay_classes()
            for dow in WEEKDAYS
            if dow != "Mon"
        ]

    def reference_names(self):
        return [f"{self.kind}[Mon]" for d in self.delay_classes()]

    def slot_columns(self, t, s, cal):
        delay_class = np.minimum(np.asarray(s) - np.asarray(t), 7)
        dow = weekday_codes(s, cal.origin)
        columns = delay_class * 6 + dow - 1
        return np.where(dow == 0, -1, columns)[:, None]


class DelayBinsEffect(Effect):

    """Categorical delay s - t grouped in contiguous bins; bins are given by their start delays."""

    kind = "delay"

    def __init__(self, starts: Sequence[int]):
        starts = tuple(int(d) for d in starts)
        if not starts or starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("delay bin starts must begin at 0 and increase strictly")
        self.starts = starts

    def levels(self):
        labels = []
        for i, start in enumerate(self.starts):
            if i + 1 == len(self.starts):
                labels.append(f"{start}+")
            elif self.starts[i + 1] == start + 1:
                labels.append(f"{start}")
            else:
                labels.append(f"{start}-{self.starts[i + 1] - 1}")
        return labels

    def reference(self):
        return self.levels()[0]

    def level_codes(self, t, s, cal):
        delays = np.asarray(s) - np.asarray(t)
        return np.searchsorted(np.asarray(self.starts), delays, side="right") - 1

    def to_dict(self):
        return {"kind": self.kind, "starts": list(self.starts)}


class BreakpointSplit(Effect):

    """

    Duplicates the columns of its inner effects into a block for reporting dates before
    the breakpoint and a block for reporting dates on or after it.

    """

    kind = "breakpoint"

    def __init__(self, date: DateLike, effects: Sequence[Effect]):
        self.date = parse_date(date)
        self.effects = tuple(effects)
        if not self.effects:
            raise ValueError("a breakpoint split needs at least one effect")
        if any(isinstance(e, (BreakpointSplit, Intercept)) for e in self.effects):
            raise ValueError("a breakpoint split wraps plain categorical effects only")

    def _inner_names(self) -> List[str]:
        return [name for e in self.effects for name in e.column_names()]

    def column_names(self):
        names = self._inner_names()
        stamp = self.date.isoformat()
        return [f"{n}|s<{stamp}" for n in names] + [f"{n}|s>={stamp}" for n in names]

    def reference_names(self):
        names = [name for e in self.effects for name in e.reference_names()]
        stamp = self.date.isoformat()
        return [f"{n}|s<{stamp}" for n in names] + [f"{n}|s>={stamp}" for n in names]

    @property
    def n_slots(self):
        return len(self.effects)

    def slot_columns(self, t, s, cal):
        blocks = []
        offset = 0
        for effect in self.effects:
            local = effect.slot_columns(t, s, cal)
            blocks.append(np.where(local >= 0, local + offset, -1))
            offset += effect.n_columns
        columns = np.hstack(blocks)
        post = np.asarray(s) >= to_index(self.date, cal.origin)
        return np.where((columns >= 0) & post[:, None], columns + offset, columns)

    def to_dict(self):
        return {
            "kind": self.kind,
            "date": self.date.isoformat(),
            "effects": [e.to_dict() for e in self.effects],
        }


EFFECT_KINDS = {
    "intercept": Intercept,
    "occ_dom": OccurrenceDayOfMonth,
    "occ_month": OccurrenceMonth,
    "rep_holiday": ReportingHoliday,
    "rep_month": ReportingMonth,
    "rep_dow": ReportingDayOfWeek,
    "rep_weekend": ReportingWeekend,
    "rep_dow_first_week": ReportingDowFirstWeek,
}


def effect_from_dict(d: Dict) -> Effect:
    kind = d.get("kind")
    if kind == "delay":
        return DelayBinsEffect(d["starts"])
    if kind == "breakpoint":
        return BreakpointSplit(d["date"], [effect_from_dict(e) for e in d["effects"]])
    if kind not in EFFECT_KINDS:
        raise ConfigError(f"unknown effect kind: {kind!r}")
    return EFFECT_KINDS[kind]()


# Covariate specification
# ..................................................................................................................


@dataclass(frozen=True)
class CovariateSpec:

    """

    Ordered covariate effects defining the design vector x_{t,s}.

    Examples:
        >>> spec = CovariateSpec((Intercept(), ReportingWeekend(), ReportingHoliday()))
        >>> spec.column_names
        ['intercept', 'rep_weekend[Sat]', 'rep_weekend[Sun]', 'rep_holiday[national]', 'rep_holiday[unofficial]']

    """

    effects: Tuple[Effect, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "effects", tuple(self.effects))
        names = self.column_names
        if len(set(names)) != len(names):
            raise ValueError("an effect appears twice in the covariate specification")

    @property
    def column_names(self) -> List[str]:
        return [name for effect in self.effects for name in effect.column_names()]

    @property
    def n_columns(self) -> int:
        return sum(effect.n_columns for effect in self.effects)

    @property
    def reference_names(self) -> List[str]:
        return [name for effect in self.effects for name in effect.reference_names()]

    def effect_slices(self) -> List[Tuple[Effect, slice]]:
        slices = []
        offset = 0
        for effect in self.effects:
            slices.append((effect, slice(offset, offset + effect.n_columns)))
            offset += effect.n_columns
        return slices

    def find(self, kind: str) -> Optional[Tuple[Effect, slice]]:
        for effect, columns in self.effect_slices():
            if effect.kind == kind:
                return effect, columns
        return None

    def design_codes(self, t, s, cal: HolidayCalendar) -> np.ndarray:

        """

        Active column indices of the design vectors of (t, s) pairs, -1 where inactive.

        Returns an integer array with one row per pair and one column per encoded factor.

        """

        t = np.atleast_1d(np.asarray(t, dtype=np.int64))
        s = np.atleast_1d(np.asarray(s, dtype=np.int64))
        if np.any(s < t):
            raise ValueError("observation date before occurrence date")
        blocks = []
        offset = 0
        for effect in self.effects:
            local = effect.slot_columns(t, s, cal)
            blocks.append(np.where(local >= 0, local + offset, -1))
            offset += effect.n_columns
        if not blocks:
            return np.zeros((len(t), 0), dtype=np.int64)
        return np.hstack(blocks)

    def design_matrix(self, t, s, cal: HolidayCalendar) -> np.ndarray:
        codes = self.design_codes(t, s, cal)
        return codes_to_matrix(codes, self.n_columns)

    def linear_predictor(self, gamma: np.ndarray, t, s, cal: HolidayCalendar) -> np.ndarray:
        """x'_{t,s} gamma without materialising the design matrix."""
        codes = self.design_codes(t, s, cal)
        padded = np.append(np.asarray(gamma, dtype=float), 0.0)
        return padded[codes].sum(axis=1)

    def to_dict(self) -> Dict:
        return {"effects": [e.to_dict() for e in self.effects], "columns": self.column_names}

    @classmethod
    def from_dict(cls, d: Dict) -> "CovariateSpec":
        return cls(tuple(effect_from_dict(e) for e in d["effects"]))


def codes_to_matrix(codes: np.ndarray, n_columns: int) -> np.ndarray:
    matrix = np.zeros((codes.shape[0], n_columns), dtype=float)
    rows, slots = np.nonzero(codes >= 0)
    matrix[rows, codes[rows, slots]] = 1.0
    return matrix


def design_vector(t: int, s: int, spec: CovariateSpec, cal: HolidayCalendar) -> np.ndarray:

    """

    Design vector x_{t,s} of a single (occurrence, observation) pair.

    Examples:
        >>> cal = default_calendar()
        >>> spec = CovariateSpec((ReportingDayOfWeek(), ReportingHoliday()))
        >>> monday = to_index("2003-06-16")
        >>> design_vector(monday, monday, spec, cal).tolist()
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]

    """

    if s < t:
        raise ValueError(f"observation day {s} precedes occurrence day {t}")
    return spec.design_matrix([t], [s], cal)[0]


def signatures(t, s, spec: CovariateSpec, cal: HolidayCalendar) -> Tuple[np.ndarray, np.ndarray]:

    """

    Distinct design vectors of (t, s) pairs and, for every pair, the index of its vector.

    """

    codes = spec.design_codes(t, s, cal)
    if codes.shape[1] == 0:
        return np.zeros((1, spec.n_columns)), np.zeros(codes.shape[0], dtype=np.int64)
    unique_codes, inverse = np.unique(codes, axis=0, return_inverse=True)
    return codes_to_matrix(unique_codes, spec.n_columns), inverse.reshape(-1)


# Named specifications
# ..................................................................................................................


def _starts(bins) -> Tuple[int, ...]:
    return tuple(getattr(bins, "starts", bins))


def six_effect_spec(bins) -> CovariateSpec:
    """Occurrence day-of-month and month, reporting holiday, month and weekday-by-first-week, delay bins."""
    return CovariateSpec(
        (
            Intercept(),
            OccurrenceDayOfMonth(),
            OccurrenceMonth(),
            ReportingHoliday(),
            ReportingMonth(),
            ReportingDowFirstWeek(),
            DelayBinsEffect(_starts(bins)),
        )
    )


def approximate_spec(bins, breakpoint: Optional[DateLike] = None) -> CovariateSpec:
    """Reporting weekday, reporting holiday and delay bins, optionally split at a breakpoint."""
    calendar_effects: Tuple[Effect, ...] = (ReportingDayOfWeek(), ReportingHoliday())
    if breakpoint is not None:
        calendar_effects = (BreakpointSplit(breakpoint, calendar_effects),)
    return CovariateSpec((Intercept(),) + calendar_effects + (DelayBinsEffect(_starts(bins)),))


def exact_scenario_spec(breakpoint: Optional[DateLike] = None) -> CovariateSpec:
    """The simulation scenarios' own exposure structure: weekend and holiday classes."""
    calendar_effects: Tuple[Effect, ...] = (ReportingWeekend(), ReportingHoliday())
    if breakpoint is not None:
        calendar_effects = (BreakpointSplit(breakpoint, calendar_effects),)
    return CovariateSpec((Intercept(),) + calendar_effects)


def make_spec(
    effects: Iterable[str],
    delay_bins: Optional[Sequence[int]] = None,
    breakpoint: Optional[DateLike] = None,
    breakpoint_effects: Iterable[str] = (),
) -> CovariateSpec:

    """

    Build a covariate specification from effect names, as written in a run configuration.

    Examples:
        >>> make_spec(["intercept", "rep_dow", "delay"], delay_bins=[0, 1, 5]).n_columns
        9
        >>> make_spec(["intercept", "rep_weekend"], breakpoint="2003-01-01", breakpoint_effects=["rep_weekend"]).n_columns
        5

    """

    split_kinds = list(breakpoint_effects)
    if split_kinds and breakpoint is None:
        raise ConfigError("breakpoint_effects given without a breakpoint date")

    def build(kind: str) -> Effect:
        if kind == "delay":
            if delay_bins is None:
                raise ConfigError("the delay effect needs delay bins")
            return DelayBinsEffect(delay_bins)
        if kind not in EFFECT_KINDS:
            raise ConfigError(f"unknown effect: {kind!r}")
        return EFFECT_KINDS[kind]()

    plain = [build(kind) for kind in effects if kind not in split_kinds]
    if split_kinds:
        plain.append(BreakpointSplit(breakpoint, [build(kind) for kind in split_kinds]))
    return CovariateSpec(tuple(plain))
