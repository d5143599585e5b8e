# MIT License

# Copyright (c) 2024 hidden-events developers

# Chain ladder
# ..................................................................................................................
# ..................................................................................................................

import datetime as dt
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .calendars import DEFAULT_ORIGIN, to_date, to_datetime64
from .counts import EventDataset
from .errors import ConfigError, EmptyTriangleError

PERIOD_LENGTHS = ("year", "28d")


@dataclass(frozen=True, eq=False)
class AggregateTriangle:

    """

    Cumulative counts by occurrence period (rows) and development period (columns).

    `cum` holds NaN where a cell lies beyond the evaluation date; `full` marks the cells whose
    development period ended by the evaluation date. The cells of the last diagonal are only
    partially observed when the evaluation date falls inside a period.

    Examples:
        >>> tri = AggregateTriangle.from_cumulative([[10, 15], [20, np.nan]])
        >>> tri.latest().tolist(), tri.latest_development().tolist()
        ([15.0, 20.0], [1, 0])

    """

    cum: np.ndarray
    full: np.ndarray
    period_length: str = "year"
    period_starts: Tuple[dt.date, ...] = ()
    eval_date: Optional[int] = None
    origin: dt.date = DEFAULT_ORIGIN

    def __post_init__(self):
        cum = np.asarray(self.cum, dtype=float)
        full = np.asarray(self.full, dtype=bool)
        if cum.ndim != 2 or cum.shape != full.shape or cum.shape[0] == 0:
            raise ValueError("cum and full must be matching non-empty matrices")
        if np.any(full & np.isnan(cum)):
            raise ValueError("a fully observed cell has no value")
        with np.errstate(invalid="ignore"):
            if np.any(np.diff(cum, axis=1) < 0):
                raise ValueError("cumulative counts must be non-decreasing in development")
        object.__setattr__(self, "cum", cum)
        object.__setattr__(self, "full", full)

    @classmethod
    def from_cumulative(cls, matrix) -> "AggregateTriangle":
        """Triangle from a cumulative matrix, NaN marking unobserved cells; all given cells are complete."""
        cum = np.asarray(matrix, dtype=float)
        return cls(cum, ~np.isnan(cum), period_length="year")

    @property
    def n_periods(self) -> int:
        return self.cum.shape[0]

    @property
    def n_development(self) -> int:
        return self.cum.shape[1]

    def latest_development(self) -> np.ndarray:
        """Last observed development period per row, -1 for an empty row."""
        observed = ~np.isnan(self.cum)
        last = self.n_development - 1 - np.argmax(observed[:, ::-1], axis=1)
        return np.where(observed.any(axis=1), last, -1)

    def latest(self) -> np.ndarray:
        dev = self.latest_development()
        return np.where(dev >= 0, self.cum[np.arange(self.n_periods), np.maximum(dev, 0)], 0.0)

    def incremental(self) -> np.ndarray:
        incr = np.diff(self.cum, axis=1, prepend=0.0)
        return incr

    def row_labels(self) -> List[str]:
        if self.period_starts:
            return [start.isoformat() for start in self.period_starts]
        return [str(i) for i in range(self.n_periods)]

    def to_frame(self, incremental: bool = False) -> pd.DataFrame:
        values = self.incremental() if incremental else self.cum
        return pd.DataFrame(
            values,
            index=pd.Index(self.row_labels(), name="occurrence_period"),
            columns=pd.Index(range(self.n_development), name="development"),
        )


def _periods(days: np.ndarray, start: int, period_length: str, anchor: Tuple[int, int], origin: dt.date):
    if period_length == "28d":
        return (days - start) // 28
    stamps = pd.DatetimeIndex(to_datetime64(days, origin))
    years = stamps.year.to_numpy()
    before = (stamps.month.to_numpy() * 100 + stamps.day.to_numpy()) < anchor[0] * 100 + anchor[1]
    first = to_date(start, origin)
    first_year = first.year - (1 if (first.month, first.day) < anchor else 0)
    return years - before - first_year


def aggregate(
    events: EventDataset,
    eval_date: int,
    period_length: str = "year",
    anchor: Tuple[int, int] = (1, 1),
) -> AggregateTriangle:

    """

    Aggregate the events observed by eval_date on a yearly or 28-day grid.

    Yearly periods are civil years starting on the anchor (month, day); 28-day periods are
    consecutive blocks from the first occurrence date. The development period of an event
    is the period of its observation date minus the period of its occurrence date. The
    period containing eval_date is included even when it has not ended.

    Examples:
        >>> events = EventDataset.from_days([10, 10, 200], [10, 380, 250])
        >>> tri = aggregate(events, 400)
        >>> tri.cum.tolist()
        [[2.0, 3.0], [0.0, nan]]

    """

    if period_length not in PERIOD_LENGTHS:
        raise ConfigError(f"period_length should be one of {PERIOD_LENGTHS}, got {period_length!r}")
    try:
        dt.date(2001, *anchor)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid grid anchor {anchor!r}, expected (month, day) of a non-leap year")
    if len(events) == 0:
        raise EmptyTriangleError("the event dataset is empty")
    eval_date = int(eval_date)
    start = events.first_day
    if eval_date < start:
        raise ValueError("eval_date precedes the first occurrence date")

    keep = events.observation <= eval_date
    occ_period = _periods(events.occurrence[keep], start, period_length, anchor, events.origin)
    obs_period = _periods(events.observation[keep], start, period_length, anchor, events.origin)
    current, following = _periods(np.array([eval_date, eval_date + 1]), start, period_length, anchor, events.origin)
    complete = following > current

    size = int(current) + 1
    incr = np.zeros((size, size))
    np.add.at(incr, (occ_period, obs_period - occ_period), 1.0)
    i, j = np.indices((size, size))
    observed = i + j <= current
    full = (i + j < current) | (observed & complete)
    cum = np.where(observed, np.cumsum(incr, axis=1), np.nan)

    if period_length == "28d":
        starts = tuple(to_date(start + 28 * k, events.origin) for k in range(size))
    else:
        first = to_date(start, events.origin)
        first_year = first.year - (1 if (first.month, first.day) < anchor else 0)
        starts = tuple(dt.date(first_year + k, *anchor) for k in range(size))
    return AggregateTriangle(cum, full, period_length, starts, eval_date, events.origin)


def development_factors(tri: AggregateTriangle) -> np.ndarray:

    """

    Volume-weighted development factors f_j = sum_i cum(i, j+1) / sum_i cum(i, j), over the
    rows where cell (i, j+1) is fully observed, for j below the last fully observed
    development period.

    Examples:
        >>> development_factors(AggregateTriangle.from_cumulative([[10, 15], [20, np.nan]])).tolist()
        [1.5]

    """

    full_devs = np.flatnonzero(tri.full.any(axis=0))
    if len(full_devs) == 0:
        raise EmptyTriangleError("no fully observed cell to derive development factors from")
    horizon = int(full_devs[-1])
    factors = np.full(horizon, np.nan)
    for j in range(horizon):
        rows = tri.full[:, j + 1]
        denominator = tri.cum[rows, j].sum()
        if denominator > 0:
            factors[j] = tri.cum[rows, j + 1].sum() / denominator
    undefined = np.flatnonzero(np.isnan(factors))
    if len(undefined):
        warnings.warn(
            f"development factor(s) {undefined.tolist()} undefined: zero denominator",
            RuntimeWarning,
        )
    return factors


def ultimates(tri: AggregateTriangle, factors: Optional[np.ndarray] = None) -> np.ndarray:
    """Latest cumulative count of every row developed to the last fully observed period."""
    if factors is None:
        factors = development_factors(tri)
    latest = tri.latest()
    dev = tri.latest_development()
    ultimate = latest.copy()
    for i in range(tri.n_periods):
        remaining = factors[max(dev[i], 0) :]
        ultimate[i] = latest[i] * np.prod(remaining)
    return ultimate


def ibnr_estimate(tri: AggregateTriangle, factors: Optional[np.ndarray] = None) -> float:

    """

    Chain-ladder count of events occurred but not yet observed, without a tail factor.

    Examples:
        >>> ibnr_estimate(AggregateTriangle.from_cumulative([[10, 15], [20, np.nan]]))
        10.0

    """

    return float(np.sum(ultimates(tri, factors) - tri.latest()))


def chain_ladder_report(tri: AggregateTriangle) -> Dict:
    factors = development_factors(tri)
    ultimate = ultimates(tri, factors)
    return {
        "period_length": tri.period_length,
        "eval_date": None if tri.eval_date is None else to_date(tri.eval_date, tri.origin),
        "factors": [None if np.isnan(f) else float(f) for f in factors],
        "rows": [
            {"period": label, "latest": float(latest), "ultimate": float(ult)}
            for label, latest, ult in zip(tri.row_labels(), tri.latest(), ultimate)
        ],
        "ibnr": float(np.sum(ultimate - tri.latest())),
    }
