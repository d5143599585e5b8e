# MIT License

# Copyright (c) 2024 hidden-events developers

# Delay binning
# ..................................................................................................................
# ..................................................................................................................

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .calendars import DelayBinsEffect
from .counts import CountTriangle


@dataclass(frozen=True, eq=False)
class HazardTable:

    """

    Observed delays per delay d: count equal to d, count at least d, and the hazard
    exposure -log(1 - n_equal / n_geq). Right truncation is ignored.

    Examples:
        >>> table = HazardTable.from_delays([0, 0, 1, 2])
        >>> table.n_equal.tolist(), table.n_geq.tolist()
        ([2, 1, 1], [4, 2, 1])
        >>> [round(h, 6) for h in table.hazard_exposure.tolist()]
        [0.693147, 0.693147, inf]

    """

    delay: np.ndarray
    n_equal: np.ndarray
    n_geq: np.ndarray

    @classmethod
    def from_counts(cls, n_equal: Sequence[int]) -> "HazardTable":
        n_equal = np.asarray(n_equal, dtype=np.int64)
        if n_equal.ndim != 1 or len(n_equal) == 0 or n_equal.sum() == 0:
            raise ValueError("a hazard table needs at least one observed delay")
        if np.any(n_equal < 0):
            raise ValueError("delay counts must be non-negative")
        last = int(np.flatnonzero(n_equal)[-1])
        n_equal = n_equal[: last + 1]
        n_geq = np.cumsum(n_equal[::-1])[::-1]
        return cls(np.arange(last + 1), n_equal, n_geq)

    @classmethod
    def from_delays(cls, delays) -> "HazardTable":
        delays = np.asarray(delays, dtype=np.int64)
        if len(delays) == 0:
            raise ValueError("a hazard table needs at least one observed delay")
        if np.any(delays < 0):
            raise ValueError("delays must be non-negative")
        return cls.from_counts(np.bincount(delays))

    @property
    def hazard(self) -> np.ndarray:
        return self.n_equal / self.n_geq

    @property
    def hazard_exposure(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log1p(-self.hazard)

    @property
    def n_events(self) -> int:
        return int(self.n_geq[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "delay": self.delay,
                "n_equal": self.n_equal,
                "n_geq": self.n_geq,
                "hazard": self.hazard_exposure,
            }
        )


def hazard_table(triangle: CountTriangle) -> HazardTable:
    return HazardTable.from_counts(np.bincount(triangle.delay, weights=triangle.count).astype(np.int64))


def kaplan_meier(delays) -> np.ndarray:

    """

    Kaplan-Meier survival S(d) = prod_{i <= d} (1 - n_equal(i) / n_geq(i)) for d = 0..max delay.

    Examples:
        >>> kaplan_meier([0, 0, 1, 2]).tolist()
        [0.5, 0.25, 0.0]
        >>> kaplan_meier([0, 0]).tolist()
        [0.0]

    """

    table = HazardTable.from_delays(delays)
    return np.cumprod(1.0 - table.hazard)


def delay_model_survival(alphas) -> np.ndarray:
    """Survival prod_{i <= d} exp(-alpha_i) of a delay-only exposure model with unit-exponential delay."""
    alphas = np.asarray(alphas, dtype=float)
    return np.exp(-np.cumsum(alphas))


def km_equivalence_check(triangle: CountTriangle, alphas: Optional[np.ndarray] = None) -> float:

    """

    Largest absolute gap between the survival of a per-delay exposure model and the
    Kaplan-Meier estimate of the observed delays.

    Args:
        triangle: observed counts
        alphas: per-delay exposures, e.g. from a fitted per-delay model (default: the hazard
            exposures of the hazard table, the maximum likelihood solution without truncation)

    """

    table = hazard_table(triangle)
    if alphas is None:
        alphas = table.hazard_exposure
    alphas = np.asarray(alphas, dtype=float)[: len(table.delay)]
    km = np.cumprod(1.0 - table.hazard)[: len(alphas)]
    return float(np.max(np.abs(delay_model_survival(alphas) - km)))


# Delay bins
# ..................................................................................................................


@dataclass(frozen=True)
class DelayBins:

    """

    Contiguous delay bins given by their start delays; the last bin is right-open.

    Examples:
        >>> bins = DelayBins((0, 1, 2, 5))
        >>> bins.labels()
        ['0', '1', '2-4', '5+']
        >>> bins.bin_of([0, 3, 4, 100]).tolist()
        [0, 2, 2, 3]

    """

    starts: tuple

    def __post_init__(self):
        object.__setattr__(self, "starts", tuple(int(d) for d in self.starts))
        DelayBinsEffect(self.starts)

    @property
    def n_bins(self) -> int:
        return len(self.starts)

    def bin_of(self, delays) -> np.ndarray:
        return np.searchsorted(np.asarray(self.starts), np.asarray(delays), side="right") - 1

    def labels(self) -> List[str]:
        return self.as_effect().levels()

    def as_effect(self) -> DelayBinsEffect:
        return DelayBinsEffect(self.starts)

    def to_json(self) -> str:
        return json.dumps(list(self.starts))

    @classmethod
    def from_json(cls, text: str) -> "DelayBins":
        return cls(tuple(json.loads(text)))


@dataclass(frozen=True)
class BinningOptions:

    """

    Args:
        threshold: largest tolerated gap between a log hazard exposure and its bin mean
        growth: bins starting at delay a are at most max(1, ceil(a * (growth - 1))) wide
        spike_factor: a delay whose hazard exceeds both neighbours by this factor is a singleton
        min_singleton: delays below this are singletons
        tail_fraction: the open tail bin starts once fewer than this fraction of events remain

    """

    threshold: float = 0.15
    growth: float = 1.5
    spike_factor: float = 3.0
    min_singleton: int = 8
    tail_fraction: float = 0.01

    def __post_init__(self):
        if self.threshold <= 0 or self.growth <= 1 or self.spike_factor <= 1:
            raise ValueError("threshold must be positive, growth and spike_factor above 1")
        if self.min_singleton < 1:
            raise ValueError("min_singleton must be at least 1")
        if not 0 <= self.tail_fraction < 1:
            raise ValueError("tail_fraction must lie in [0, 1)")

    def max_width(self, start: int) -> int:
        return max(1, int(np.ceil(start * (self.growth - 1.0))))


def _group(
    lo: int, hi: int, log_hazard: np.ndarray, informative: np.ndarray, opts: BinningOptions
) -> List[int]:
    """Start delays of the bins covering [lo, hi), grouped greedily from left to right."""
    starts = [lo]
    start, total, count = lo, 0.0, 0
    for d in range(lo, hi):
        if d > start:
            wide = d - start >= opts.max_width(start)
            strays = informative[d] and count > 0 and abs(log_hazard[d] - total / count) > opts.threshold
            if wide or strays:
                starts.append(d)
                start, total, count = d, 0.0, 0
        if informative[d]:
            total += log_hazard[d]
            count += 1
    return starts


def propose_bins(table: HazardTable, opts: Optional[BinningOptions] = None) -> DelayBins:

    """

    Group delays with approximately constant hazard exposure into contiguous bins.

    Delays below opts.min_singleton and hazard spikes get bins of their own; the open tail
    bin starts where fewer than opts.tail_fraction of the events remain, or at the last
    observed delay. The delays in between are grouped in one pass from left to right: a
    delay opens a new bin when its log hazard exposure is more than opts.threshold away
    from the running mean of the current bin, or when the current bin has reached its
    maximum width. Zero and infinite hazard exposures do not count towards bin means.

    """

    opts = opts or BinningOptions()
    he = table.hazard_exposure
    last = int(table.delay[-1])
    informative = np.isfinite(he) & (he > 0)
    with np.errstate(divide="ignore"):
        log_hazard = np.where(informative, np.log(np.where(informative, he, 1.0)), 0.0)

    sparse = np.flatnonzero(
        (table.delay >= opts.min_singleton) & (table.n_geq < opts.tail_fraction * table.n_events)
    )
    tail = min(int(sparse[0]), last) if len(sparse) else last
    if tail == 0:
        return DelayBins((0,))

    head = min(opts.min_singleton, tail)
    starts = list(range(head))

    spikes = []
    for d in range(max(head, 1), tail):
        if d + 1 > last or not informative[d]:
            continue
        left, right = he[d - 1], he[d + 1]
        if he[d] > opts.spike_factor * left and he[d] > opts.spike_factor * right:
            spikes.append(d)

    lo = head
    for cut in spikes + [tail]:
        if cut > lo:
            starts += _group(lo, cut, log_hazard, informative, opts)
        if cut < tail:
            starts.append(cut)
        lo = cut + 1
    starts.append(tail)
    return DelayBins(tuple(sorted(set(starts))))
