# MIT License

# Copyright (c) 2024 hidden-events developers

# Prediction and backtesting
# ..................................................................................................................
# ..................................................................................................................

import datetime as dt
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .calendars import CovariateSpec, HolidayCalendar, default_calendar, to_date, to_datetime64
from .counts import CountTriangle, EventDataset, actual_hidden_count, triangle_from_events
from .errors import HiddenEventsError
from .likelihood import FitOptions, FitResult, fit
from .timechange import (
    MAX_HORIZON,
    TAIL_TOLERANCE,
    TimeChangedDistribution,
    exposure_schedule,
    observed_probability,
)
from .utils import group_in_batches, segment_cumsum, segment_starts

RELIABILITY_FLOOR = 1e-4
DEFAULT_GAP = 5


def occurrence_intensity(n_observed, p_observed):

    """

    Non-parametric occurrence intensity N_t^Obs / p_t^Obs.

    Examples:
        >>> occurrence_intensity(50, 0.8)
        62.5
        >>> occurrence_intensity(0, 0.3)
        0.0

    """

    n_observed = np.asarray(n_observed, dtype=float)
    p_observed = np.asarray(p_observed, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(n_observed > 0, n_observed / p_observed, 0.0)
    return float(ratio) if ratio.ndim == 0 else ratio


def estimate_lambda(
    triangle: CountTriangle,
    fit_result: FitResult,
    t: int,
    cal: Optional[HolidayCalendar] = None,
    reliability_floor: float = RELIABILITY_FLOOR,
) -> float:

    """

    Occurrence intensity of date t from the events observed by the triangle's evaluation date.

    """

    cal = cal or default_calendar(triangle.origin)
    tau = triangle.eval_date
    if t > tau:
        raise ValueError("occurrence date after the evaluation date")
    sched = exposure_schedule(fit_result.model, t, cal, horizon=tau - t + 1)
    p = observed_probability(t, tau, sched, fit_result.dist)
    if p < reliability_floor:
        warnings.warn(
            f"observation probability {p:.3g} of day {t} is below the reliability floor",
            RuntimeWarning,
        )
    return occurrence_intensity(triangle.row_total(t), p)


@dataclass(eq=False)
class PredictionReport:

    """

    Expected counts of the events occurred by eval_date and observed after the computation date.

    `occurrence`, `n_observed`, `p_observed` and `lambda_hat` describe the occurrence dates
    with observed events; `future_cells` holds one row per predicted (t, s) cell.

    """

    eval_date: int
    computation_date: int
    horizon_date: Optional[int]
    origin: dt.date
    occurrence: np.ndarray
    n_observed: np.ndarray
    p_observed: np.ndarray
    lambda_hat: np.ndarray
    future_cells: pd.DataFrame
    observed_gap: int
    reliability_floor: float = RELIABILITY_FLOOR

    @property
    def hidden_total(self) -> float:
        return float(self.future_cells["expected"].sum())

    @property
    def hidden_variance(self) -> float:
        """Poisson variance of the hidden total, sum of lambda_t p_{t,s} over the future cells."""
        return float(self.future_cells["expected"].sum())

    @property
    def ibnr_total(self) -> float:
        """Events occurred by eval_date and observed after it: the gap counts plus the hidden total."""
        return self.observed_gap + self.hidden_total

    @property
    def unreliable_dates(self) -> List[dt.date]:
        low = self.p_observed < self.reliability_floor
        return [to_date(t, self.origin) for t in self.occurrence[low]]

    @property
    def by_future_date(self) -> pd.Series:
        return self.future_cells.groupby("observation_date")["expected"].sum()

    @property
    def by_future_month(self) -> pd.Series:
        months = self.future_cells["observation_date"].dt.to_period("M")
        return self.future_cells.groupby(months)["expected"].sum()

    def lambda_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "occurrence_date": to_datetime64(self.occurrence, self.origin),
                "n_observed": self.n_observed,
                "p_observed": self.p_observed,
                "lambda_hat": self.lambda_hat,
            }
        )

    def to_dict(self) -> Dict:
        return {
            "eval_date": to_date(self.eval_date, self.origin),
            "computation_date": to_date(self.computation_date, self.origin),
            "horizon_date": None
            if self.horizon_date is None
            else to_date(self.horizon_date, self.origin),
            "observed_gap": self.observed_gap,
            "hidden_total": self.hidden_total,
            "hidden_variance": self.hidden_variance,
            "ibnr_total": self.ibnr_total,
            "n_future_cells": int(len(self.future_cells)),
            "unreliable_dates": self.unreliable_dates,
        }


def _future_batch(
    fit_result: FitResult,
    cal: HolidayCalendar,
    rows: np.ndarray,
    k0: np.ndarray,
    limit: np.ndarray,
    lam: np.ndarray,
    infinite: bool,
    tail_tolerance: float,
):
    # k0 = computation_date - t + 1 exposures are observed; predict delays k0 .. limit - 1
    model, dist = fit_result.model, fit_result.dist
    window = 64
    while True:
        lengths = np.minimum(k0 + window, limit)
        starts = segment_starts(lengths)
        pair_row = np.repeat(np.arange(len(rows)), lengths)
        pair_delay = np.arange(lengths.sum()) - starts[pair_row]
        alpha = model.exposures(rows[pair_row], rows[pair_row] + pair_delay, cal)
        phi = segment_cumsum(alpha, lengths)
        padded = starts + np.arange(len(rows))
        tail = dist.sf(phi)
        done = (tail[padded + lengths] < tail_tolerance) | (lengths >= limit)
        if done.all():
            break
        window *= 4

    p_observed = dist.cdf(phi[padded + k0])
    point_row = np.repeat(np.arange(len(rows)), lengths + 1)
    point_k = np.arange(len(phi)) - padded[point_row]
    candidate = np.where(
        (point_k >= k0[point_row]) & (tail < tail_tolerance), point_k, lengths[point_row]
    )
    horizon = np.minimum.reduceat(candidate, padded)

    keep = (pair_delay >= k0[pair_row]) & (pair_delay < horizon[pair_row])
    lo = padded[pair_row] + pair_delay
    mass = tail[lo] - tail[lo + 1]
    occ = rows[pair_row][keep]
    delay = pair_delay[keep]
    expected = lam[pair_row][keep] * np.maximum(mass[keep], 0.0)

    if infinite:
        leftover = lam * tail[padded + horizon]
        has_cells = horizon > k0
        last_cell = np.cumsum(np.bincount(pair_row[keep], minlength=len(rows))) - 1
        np.add.at(expected, last_cell[has_cells], leftover[has_cells])
        extra = (~has_cells) & (leftover > 0)
        occ = np.concatenate([occ, rows[extra]])
        delay = np.concatenate([delay, k0[extra]])
        expected = np.concatenate([expected, leftover[extra]])
    return p_observed, occ, delay, expected


def predict_cells(
    triangle: CountTriangle,
    fit_result: FitResult,
    eval_date: int,
    computation_date: Optional[int] = None,
    horizon: Optional[int] = None,
    cal: Optional[HolidayCalendar] = None,
    max_horizon: int = MAX_HORIZON,
    tail_tolerance: float = TAIL_TOLERANCE,
    reliability_floor: float = RELIABILITY_FLOOR,
    max_batch_size: int = 50_000,
    progress_bar: bool = False,
) -> PredictionReport:

    """

    Predict the future reports of the events occurred by eval_date.

    Intensities are estimated from all events observed by the computation date; future cells
    are the (t, s) with t <= eval_date and computation_date < s <= horizon. Without a horizon
    the distribution of every occurrence date is cut where its remaining mass falls below
    tail_tolerance (after max_horizon days at the latest) and the remainder is assigned to
    its last cell.

    Args:
        triangle: observed counts, at the computation date or later
        fit_result: fitted exposure model and time-changed distribution
        eval_date: evaluation date tau (day index)
        computation_date: date whose observations are used (default: the triangle's)
        horizon: last observation date predicted (default: unbounded)
        cal: holiday calendar
        max_horizon: longest delay predicted
        tail_tolerance: remaining probability mass at which predictions stop
        reliability_floor: occurrence dates with a smaller observation probability are flagged
        max_batch_size: maximum number of (t, s) pairs evaluated at once
        progress_bar: print a progress bar (default is False)

    """

    cal = cal or default_calendar(triangle.origin)
    if computation_date is None:
        computation_date = triangle.eval_date
    if computation_date > triangle.eval_date:
        raise ValueError("the triangle ends before the computation date")
    if computation_date < triangle.eval_date:
        triangle = triangle.truncate(computation_date)
    if eval_date > computation_date:
        raise ValueError("the computation date precedes the evaluation date")

    totals = triangle.row_totals
    days = triangle.days
    select = (days <= eval_date) & (totals > 0)
    rows, n_observed = days[select], totals[select]
    k0 = computation_date - rows + 1
    if horizon is None:
        limit = np.maximum(k0, max_horizon)
    else:
        limit = np.maximum(k0, np.minimum(max_horizon, horizon - rows + 1))
        if horizon <= computation_date:
            warnings.warn("the horizon precedes the computation date: nothing to predict", RuntimeWarning)

    # intensities need p_observed, so they are computed batch by batch from the same schedules
    p_observed = np.zeros(len(rows))
    lambda_hat = np.zeros(len(rows))
    parts = []
    batches = group_in_batches(limit.tolist(), max_batch_size=max_batch_size)
    if progress_bar:
        print("Predicting future cells...")
        batches = tqdm(batches)
    for batch in batches:
        idx = np.asarray(batch)
        sched_p = _observed_batch(fit_result, cal, rows[idx], k0[idx])
        lam = occurrence_intensity(n_observed[idx], sched_p)
        p, occ, delay, expected = _future_batch(
            fit_result,
            cal,
            rows[idx],
            k0[idx],
            limit[idx],
            np.atleast_1d(lam),
            horizon is None,
            tail_tolerance,
        )
        p_observed[idx] = p
        lambda_hat[idx] = lam
        parts.append((occ, delay, expected))

    if parts:
        occ = np.concatenate([part[0] for part in parts])
        delay = np.concatenate([part[1] for part in parts])
        expected = np.concatenate([part[2] for part in parts])
    else:
        occ = delay = np.zeros(0, dtype=np.int64)
        expected = np.zeros(0)
    future = pd.DataFrame(
        {
            "occurrence_date": to_datetime64(occ, triangle.origin),
            "observation_date": to_datetime64(occ + delay, triangle.origin),
            "expected": expected,
        }
    )

    unreliable = int(np.sum(p_observed < reliability_floor))
    if unreliable:
        warnings.warn(
            f"{unreliable} occurrence date(s) have an observation probability below "
            f"{reliability_floor:g}; their intensities are unreliable",
            RuntimeWarning,
        )
    return PredictionReport(
        eval_date=int(eval_date),
        computation_date=int(computation_date),
        horizon_date=None if horizon is None else int(horizon),
        origin=triangle.origin,
        occurrence=rows,
        n_observed=n_observed,
        p_observed=p_observed,
        lambda_hat=lambda_hat,
        future_cells=future,
        observed_gap=triangle.gap_counts(eval_date),
        reliability_floor=reliability_floor,
    )


def _observed_batch(fit_result: FitResult, cal: HolidayCalendar, rows: np.ndarray, k0: np.ndarray):
    pair_row = np.repeat(np.arange(len(rows)), k0)
    pair_delay = np.arange(k0.sum()) - segment_starts(k0)[pair_row]
    alpha = fit_result.model.exposures(rows[pair_row], rows[pair_row] + pair_delay, cal)
    phi = np.bincount(pair_row, weights=alpha, minlength=len(rows))
    return fit_result.dist.cdf(phi)


def percentage_error(predicted: float, actual: float) -> float:

    """

    Percentage error 100 (actual - predicted) / actual; positive values are underestimates.

    Examples:
        >>> percentage_error(90, 100), percentage_error(110, 100), percentage_error(5, 5)
        (10.0, -10.0, 0.0)

    """

    if actual == 0:
        warnings.warn("percentage error undefined: no actual hidden events", RuntimeWarning)
        return float("nan")
    return float(100.0 * (actual - predicted) / actual)


# Backtesting
# ..................................................................................................................


@dataclass(eq=False)
class BacktestResult:

    """

    Predicted and actual hidden counts per evaluation date.

    Dates whose fit failed, or without actual hidden events, are flagged and left out of
    the summary.

    """

    frame: pd.DataFrame

    def summary(self) -> Dict:
        usable = self.frame[~self.frame["flagged"] & np.isfinite(self.frame["pe"])]
        return {
            "mean_pe": float(usable["pe"].mean()) if len(usable) else float("nan"),
            "sd_pe": float(usable["pe"].std(ddof=1)) if len(usable) > 1 else float("nan"),
            "n_dates": int(len(self.frame)),
            "n_flagged": int(self.frame["flagged"].sum()),
        }

    @property
    def pe(self) -> pd.Series:
        return self.frame.set_index("eval_date")["pe"]


def _backtest_row(
    events: EventDataset,
    tau: int,
    gap: int,
    horizon: Optional[int],
    fit_result: Optional[FitResult],
    message: str,
    cal: HolidayCalendar,
    predict_kwargs: Dict,
) -> Dict:
    horizon_date = None if horizon is None else tau + horizon
    actual = actual_hidden_count(events, tau, horizon_date)
    row = {
        "eval_date": to_date(tau, events.origin),
        "computation_date": to_date(tau + gap, events.origin),
        "predicted": float("nan"),
        "observed_gap": 0,
        "hidden_total": float("nan"),
        "actual": actual,
        "pe": float("nan"),
        "flagged": fit_result is None,
        "message": message,
    }
    if fit_result is None:
        return row
    try:
        triangle = triangle_from_events(events, tau + gap)
        report = predict_cells(
            triangle, fit_result, tau, tau + gap, horizon_date, cal, **predict_kwargs
        )
    except HiddenEventsError as err:
        row.update(flagged=True, message=str(err))
        return row
    row.update(
        predicted=report.ibnr_total,
        observed_gap=report.observed_gap,
        hidden_total=report.hidden_total,
    )
    if actual == 0:
        row.update(flagged=True, message="no actual hidden events")
    else:
        row["pe"] = percentage_error(report.ibnr_total, actual)
    if not fit_result.converged:
        row.update(flagged=True, message=fit_result.message)
    return row


def _backtest_block(
    events: EventDataset,
    block: Sequence[int],
    spec: CovariateSpec,
    dist: TimeChangedDistribution,
    cal: HolidayCalendar,
    gap: int,
    horizon: Optional[int],
    opts: FitOptions,
    predict_kwargs: Dict,
) -> List[Dict]:
    # the block's first date is refitted, the others reuse its parameters
    fit_result, message = None, ""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            triangle = triangle_from_events(events, block[0] + gap)
            fit_result = fit(triangle, spec, dist, cal, opts=opts)
        except HiddenEventsError as err:
            message = f"{type(err).__name__}: {err}"
        return [
            _backtest_row(events, tau, gap, horizon, fit_result, message, cal, predict_kwargs)
            for tau in block
        ]


def backtest(
    events: EventDataset,
    eval_dates: Sequence[int],
    spec: CovariateSpec,
    dist: Optional[TimeChangedDistribution] = None,
    cal: Optional[HolidayCalendar] = None,
    gap: int = DEFAULT_GAP,
    horizon: Optional[int] = None,
    refit_every: int = 1,
    opts: Optional[FitOptions] = None,
    n_jobs: int = 1,
    progress_bar: bool = False,
    **predict_kwargs,
) -> BacktestResult:

    """

    Rolling out-of-time evaluation of the hidden-count predictions.

    For every evaluation date tau the model is calibrated on the events observed by tau + gap
    (refitted every refit_every dates, the dates in between reuse the last fit) and its
    prediction of the events occurred by tau and observed after tau is compared with the
    actual count.

    Args:
        events: complete event dataset, including events observed after the evaluation dates
        eval_dates: evaluation dates (day indices)
        spec: covariate specification
        dist: law of the time-changed delay (default unit exponential)
        cal: holiday calendar
        gap: days between an evaluation date and its computation date
        horizon: days after the evaluation date counted as hidden (default: all)
        refit_every: number of consecutive evaluation dates sharing one fit
        opts: fit options
        n_jobs: number of parallel workers over blocks of dates
        progress_bar: print a progress bar (default is False)

    """

    dist = dist or TimeChangedDistribution()
    cal = cal or default_calendar(events.origin)
    opts = opts or FitOptions()
    if gap < 0:
        raise ValueError("gap must be non-negative")
    if refit_every < 1:
        raise ValueError("refit_every must be at least 1")
    eval_dates = sorted(int(tau) for tau in eval_dates)
    if not eval_dates:
        raise ValueError("no evaluation date")
    if eval_dates[0] < events.first_day or eval_dates[-1] + gap > events.last_day:
        raise ValueError("every evaluation date plus the gap must lie within the data range")

    blocks = [eval_dates[i : i + refit_every] for i in range(0, len(eval_dates), refit_every)]
    if progress_bar:
        print("Backtesting %s evaluation dates..." % len(eval_dates))
        blocks = tqdm(blocks)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_backtest_block)(events, block, spec, dist, cal, gap, horizon, opts, predict_kwargs)
        for block in blocks
    )
    frame = pd.DataFrame([row for rows in results for row in rows])
    flagged = int(frame["flagged"].sum())
    if flagged:
        warnings.warn(f"{flagged} evaluation date(s) flagged in the backtest", RuntimeWarning)
    return BacktestResult(frame)
