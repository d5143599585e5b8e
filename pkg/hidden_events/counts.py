# MIT License

# Copyright (c) 2024 hidden-events developers

# Counts
# ..................................................................................................................
# ..................................................................................................................

import datetime as dt
import warnings
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from .calendars import DEFAULT_ORIGIN, DateLike, parse_date, to_date, to_datetime64, to_index
from .errors import DataError, EmptyTriangleError


@dataclass(frozen=True, eq=False)
class EventDataset:

    """

    Occurrence and observation day indices of individual events, in canonical order
    (by occurrence, then observation).

    Records observed before they occurred are dropped at construction and counted in
    `dropped`.

    Examples:
        >>> events = EventDataset.from_days([3, 1, 2], [3, 4, 1])
        >>> len(events), events.dropped
        (2, 1)
        >>> events.occurrence.tolist(), events.observation.tolist()
        ([1, 3], [4, 3])

    """

    occurrence: np.ndarray
    observation: np.ndarray
    origin: dt.date = DEFAULT_ORIGIN
    dropped: int = 0

    @classmethod
    def from_days(
        cls,
        occurrence,
        observation,
        origin: DateLike = DEFAULT_ORIGIN,
        warn: bool = False,
    ) -> "EventDataset":
        occurrence = np.asarray(occurrence, dtype=np.int64).reshape(-1)
        observation = np.asarray(observation, dtype=np.int64).reshape(-1)
        if occurrence.shape != observation.shape:
            raise ValueError("occurrence and observation must have the same length")
        valid = observation >= occurrence
        dropped = int((~valid).sum())
        if dropped and warn:
            warnings.warn(
                f"{dropped} record(s) observed before their occurrence date were dropped",
                RuntimeWarning,
            )
        occurrence = occurrence[valid]
        observation = observation[valid]
        order = np.lexsort((observation, occurrence))
        return cls(occurrence[order], observation[order], parse_date(origin), dropped)

    @classmethod
    def from_dates(cls, occurrence, observation, origin: DateLike = DEFAULT_ORIGIN, warn: bool = False):
        origin = parse_date(origin)
        occ = _days_since(occurrence, origin)
        obs = _days_since(observation, origin)
        return cls.from_days(occ, obs, origin, warn=warn)

    def __len__(self) -> int:
        return len(self.occurrence)

    @property
    def delays(self) -> np.ndarray:
        return self.observation - self.occurrence

    @property
    def first_day(self) -> int:
        return int(self.occurrence.min())

    @property
    def last_day(self) -> int:
        return int(self.observation.max())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "occurrence_date": to_datetime64(self.occurrence, self.origin),
                "observation_date": to_datetime64(self.observation, self.origin),
            }
        )

    def concat(self, other: "EventDataset") -> "EventDataset":
        if other.origin != self.origin:
            raise DataError("cannot combine event datasets with different origins")
        return EventDataset.from_days(
            np.concatenate([self.occurrence, other.occurrence]),
            np.concatenate([self.observation, other.observation]),
            self.origin,
        )


def _days_since(dates, origin: dt.date) -> np.ndarray:
    values = np.asarray(pd.to_datetime(pd.Series(dates)).values.astype("datetime64[D]"))
    return (values - np.datetime64(origin, "D")).astype(np.int64) + 1


@dataclass(frozen=True, eq=False)
class CountTriangle:

    """

    Daily counts N_{t,s} of events occurring on t and observed on s, for t <= s <= eval_date.

    Cells are stored sparsely as parallel arrays sorted by occurrence then delay, with
    zero cells absent. Occurrence rows run from `first_day` to `eval_date`.

    """

    eval_date: int
    occurrence: np.ndarray
    delay: np.ndarray
    count: np.ndarray
    first_day: int
    origin: dt.date = DEFAULT_ORIGIN

    @property
    def observation(self) -> np.ndarray:
        return self.occurrence + self.delay

    @property
    def days(self) -> np.ndarray:
        """Occurrence days of the rows, first_day to eval_date."""
        return np.arange(self.first_day, self.eval_date + 1, dtype=np.int64)

    @property
    def row_totals(self) -> np.ndarray:
        """N_t^Obs(eval_date) for every row in `days`."""
        return np.bincount(
            self.occurrence - self.first_day,
            weights=self.count,
            minlength=self.eval_date - self.first_day + 1,
        ).astype(np.int64)

    @property
    def total(self) -> int:
        return int(self.count.sum())

    @property
    def cells(self) -> Dict[Tuple[int, int], int]:
        return {
            (int(t), int(t + d)): int(n)
            for t, d, n in zip(self.occurrence, self.delay, self.count)
        }

    def cell(self, t: int, s: int) -> int:
        return self.cells.get((t, s), 0)

    def row_total(self, t: int) -> int:
        return int(self.count[self.occurrence == t].sum())

    def delays(self) -> np.ndarray:
        """Multiset of observed delays, one entry per event."""
        return np.repeat(self.delay, self.count)

    def truncate(self, eval_date: int) -> "CountTriangle":
        """The triangle an analyst would have seen at an earlier evaluation date."""
        if eval_date > self.eval_date:
            raise ValueError("cannot extend a triangle beyond its evaluation date")
        keep = self.occurrence + self.delay <= eval_date
        if not keep.any():
            raise EmptyTriangleError(f"no event observed by day {eval_date}")
        return CountTriangle(
            eval_date,
            self.occurrence[keep],
            self.delay[keep],
            self.count[keep],
            min(self.first_day, eval_date),
            self.origin,
        )

    def gap_counts(self, eval_date: int) -> int:

        """

        Events occurred by eval_date and observed after it, but within this triangle.

        These are known exactly when the triangle is built at a computation date after
        the evaluation date.

        """

        observation = self.occurrence + self.delay
        mask = (self.occurrence <= eval_date) & (observation > eval_date)
        return int(self.count[mask].sum())

    def to_events(self) -> EventDataset:
        return EventDataset.from_days(
            np.repeat(self.occurrence, self.count),
            np.repeat(self.occurrence + self.delay, self.count),
            self.origin,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "occurrence_date": to_datetime64(self.occurrence, self.origin),
                "observation_date": to_datetime64(self.observation, self.origin),
                "delay": self.delay,
                "count": self.count,
            }
        )

    @classmethod
    def from_frame(
        cls, df: pd.DataFrame, eval_date: DateLike, origin: DateLike = DEFAULT_ORIGIN
    ) -> "CountTriangle":
        origin = parse_date(origin)
        events = EventDataset.from_days(
            np.repeat(_days_since(df["occurrence_date"], origin), df["count"]),
            np.repeat(_days_since(df["observation_date"], origin), df["count"]),
            origin,
        )
        return triangle_from_events(events, to_index(eval_date, origin))

    def __repr__(self):
        return (
            f"CountTriangle(eval_date={to_date(self.eval_date, self.origin)}, "
            f"rows={self.eval_date - self.first_day + 1}, cells={len(self.count)}, "
            f"events={self.total})"
        )


def triangle_from_events(events: EventDataset, eval_date: int) -> CountTriangle:

    """

    Count events occurred and observed by the evaluation date.

    Examples:
        >>> events = EventDataset.from_days([1, 1, 2], [1, 3, 2])
        >>> tri = triangle_from_events(events, 2)
        >>> tri.cells
        {(1, 1): 1, (2, 2): 1}
        >>> tri.row_totals.tolist()
        [1, 1]

    """

    eval_date = int(eval_date)
    if len(events) == 0:
        raise EmptyTriangleError("the event dataset is empty")
    if eval_date < events.first_day:
        raise ValueError("eval_date precedes the first occurrence date")
    keep = (events.occurrence <= eval_date) & (events.observation <= eval_date)
    if not keep.any():
        raise EmptyTriangleError(f"no event observed by day {eval_date}")
    occurrence = events.occurrence[keep]
    delay = events.observation[keep] - occurrence
    cells, count = np.unique(np.stack([occurrence, delay], axis=1), axis=0, return_counts=True)
    return CountTriangle(
        eval_date=eval_date,
        occurrence=cells[:, 0].astype(np.int64),
        delay=cells[:, 1].astype(np.int64),
        count=count.astype(np.int64),
        first_day=events.first_day,
        origin=events.origin,
    )


def actual_hidden_count(
    events: EventDataset, eval_date: int, horizon_date: Optional[int] = None
) -> int:

    """

    Number of events occurred by eval_date and observed after it, up to horizon_date.

    Examples:
        >>> events = EventDataset.from_days([1, 2], [5, 3])
        >>> actual_hidden_count(events, 2, 10), actual_hidden_count(events, 2, 4)
        (2, 1)

    """

    if horizon_date is not None and horizon_date <= eval_date:
        raise ValueError("horizon_date must come after eval_date")
    mask = (events.occurrence <= eval_date) & (events.observation > eval_date)
    if horizon_date is not None:
        mask &= events.observation <= horizon_date
    return int(mask.sum())
