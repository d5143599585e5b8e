# MIT License

# Copyright (c) 2024 hidden-events developers

# Wrappers
# ..................................................................................................................
# ..................................................................................................................

import dataclasses
import warnings
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .binning import BinningOptions, DelayBins, hazard_table, propose_bins
from .calendars import (
    CovariateSpec,
    DateLike,
    HolidayCalendar,
    approximate_spec,
    default_calendar,
    exact_scenario_spec,
    six_effect_spec,
    to_datetime64,
    to_index,
)
from .chainladder import aggregate, ibnr_estimate
from .counts import CountTriangle, EventDataset, actual_hidden_count, triangle_from_events
from .errors import HiddenEventsError
from .likelihood import FitOptions, FitResult, fit
from .prediction import DEFAULT_GAP, PredictionReport, percentage_error, predict_cells
from .simulate import ScenarioConfig, simulate_scenario
from .timechange import TimeChangedDistribution
from .utils import write_json

STUDY_MODELS = ("exact", "approximate", "chainladder")


def fit_model(
    triangle: CountTriangle,
    spec: Optional[CovariateSpec] = None,
    dist: Optional[TimeChangedDistribution] = None,
    cal: Optional[HolidayCalendar] = None,
    bins: Optional[DelayBins] = None,
    binning_opts: Optional[BinningOptions] = None,
    opts: Optional[FitOptions] = None,
    truncation: bool = True,
    output_path: Optional[str] = None,
    progress_bar: bool = False,
) -> FitResult:

    """

    A wrapper function to calibrate an exposure model on a count triangle.

    Args:
        triangle: observed counts at the computation date
        spec: covariate specification (default: the six-effect model on `bins`)
        dist: law of the time-changed delay (default unit exponential)
        cal: holiday calendar
        bins: delay bins of the default specification (default: proposed from the hazard table)
        binning_opts: options of the bin proposal
        opts: fit options
        truncation: keep the right-truncation term of the likelihood
        output_path: path to save the fit as JSON (default is None, which means no saving to disk)
        progress_bar: print a progress bar (default is False)

    Returns:
        The FitResult.

    """

    if spec is None:
        if bins is None:
            bins = propose_bins(hazard_table(triangle), binning_opts)
        spec = six_effect_spec(bins)

    result = fit(
        triangle,
        spec,
        dist,
        cal,
        opts=opts,
        truncation=truncation,
        progress_bar=progress_bar,
    )

    if output_path is not None:
        write_json(result.to_dict(), output_path)

    return result


def predict_hidden(
    events: EventDataset,
    eval_date: int,
    computation_date: Optional[int] = None,
    horizon: Optional[int] = None,
    spec: Optional[CovariateSpec] = None,
    dist: Optional[TimeChangedDistribution] = None,
    cal: Optional[HolidayCalendar] = None,
    bins: Optional[DelayBins] = None,
    opts: Optional[FitOptions] = None,
    progress_bar: bool = False,
    **predict_kwargs,
) -> Tuple[FitResult, PredictionReport]:

    """

    A wrapper function to fit at the computation date and predict the hidden events of eval_date.

    Args:
        events: event dataset
        eval_date: evaluation date (day index)
        computation_date: date whose observations are used (default: eval_date)
        horizon: last observation date predicted (default: unbounded)
        spec: covariate specification (default: the six-effect model)
        dist: law of the time-changed delay
        cal: holiday calendar
        bins: delay bins of the default specification
        opts: fit options
        progress_bar: print a progress bar (default is False)
        **predict_kwargs: passed on to predict_cells

    Returns:
        The fit and the prediction report.

    """

    computation_date = eval_date if computation_date is None else computation_date
    cal = cal or default_calendar(events.origin)
    triangle = triangle_from_events(events, computation_date)
    result = fit_model(triangle, spec, dist, cal, bins=bins, opts=opts, progress_bar=progress_bar)
    report = predict_cells(
        triangle,
        result,
        eval_date,
        computation_date,
        horizon,
        cal,
        progress_bar=progress_bar,
        **predict_kwargs,
    )
    return result, report


# Scenario study
# ..................................................................................................................


def _granular_ibnr(
    triangle: CountTriangle,
    spec: CovariateSpec,
    dist: TimeChangedDistribution,
    cal: HolidayCalendar,
    eval_date: int,
    opts: FitOptions,
) -> Tuple[float, str]:
    result = fit(triangle, spec, dist, cal, opts=opts)
    report = predict_cells(triangle, result, eval_date, triangle.eval_date, None, cal)
    return report.ibnr_total, "" if result.converged else result.message


def _study_replication(
    cfg: ScenarioConfig,
    replication: int,
    eval_days: Sequence[int],
    models: Sequence[str],
    bins: Optional[DelayBins],
    gap: int,
    cal: HolidayCalendar,
    opts: FitOptions,
) -> List[dict]:
    dataset = simulate_scenario(cfg, cal)
    events = dataset.events
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for tau in eval_days:
            actual = actual_hidden_count(events, tau)
            triangle = triangle_from_events(events, tau + gap)
            for model in models:
                predicted, message = np.nan, ""
                try:
                    if model == "exact":
                        dist = TimeChangedDistribution(cfg.delay.kind)
                        predicted, message = _granular_ibnr(
                            triangle, exact_scenario_spec(cfg.breakpoint), dist, cal, tau, opts
                        )
                    elif model == "approximate":
                        predicted, message = _granular_ibnr(
                            triangle,
                            approximate_spec(bins, cfg.breakpoint),
                            TimeChangedDistribution(),
                            cal,
                            tau,
                            opts,
                        )
                    else:
                        predicted = ibnr_estimate(aggregate(events, tau, "year"))
                except HiddenEventsError as err:
                    message = f"{type(err).__name__}: {err}"
                pe = percentage_error(predicted, actual) if np.isfinite(predicted) else np.nan
                rows.append(
                    {
                        "scenario": cfg.name,
                        "replication": replication,
                        "seed": cfg.seed,
                        "eval_date": tau,
                        "model": model,
                        "predicted": predicted,
                        "actual": actual,
                        "pe": pe,
                        "flagged": bool(message) or not np.isfinite(pe),
                        "message": message,
                    }
                )
    return rows


def summarize_study(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of the percentage error per scenario, evaluation date and model."""
    usable = frame[~frame["flagged"]]
    summary = (
        usable.groupby(["scenario", "eval_date", "model"])["pe"]
        .agg(mean_pe="mean", sd_pe=lambda pe: pe.std(ddof=1), n="count")
        .reset_index()
    )
    flagged = frame.groupby(["scenario", "eval_date", "model"])["flagged"].sum().rename("n_flagged")
    return summary.merge(flagged.reset_index(), on=["scenario", "eval_date", "model"], how="right")


def scenario_study(
    cfg: ScenarioConfig,
    replications: int = 30,
    eval_dates: Sequence[DateLike] = ("2003-12-31", "2004-08-31"),
    models: Sequence[str] = STUDY_MODELS,
    gap: int = DEFAULT_GAP,
    cal: Optional[HolidayCalendar] = None,
    bins: Optional[DelayBins] = None,
    opts: Optional[FitOptions] = None,
    n_jobs: int = 1,
    progress_bar: bool = False,
) -> Tuple[pd.DataFrame, pd.DataFrame]:

    """

    A wrapper function to compare the exact granular, approximate granular and yearly chain
    ladder estimates over replications of a scenario.

    Replication r simulates the scenario with seed cfg.seed + r. The granular models are
    calibrated on the events observed gap days after each evaluation date; the chain ladder
    uses the events observed at the evaluation date. Without explicit bins, the approximate
    model's delay bins are proposed on the first replication at the first evaluation date
    and reused.

    Args:
        cfg: scenario configuration
        replications: number of simulated datasets
        eval_dates: evaluation dates
        models: subset of 'exact', 'approximate' and 'chainladder'
        gap: days between an evaluation date and its computation date
        cal: holiday calendar
        bins: delay bins of the approximate model
        opts: fit options
        n_jobs: number of parallel workers over replications
        progress_bar: print a progress bar (default is False)

    Returns:
        One row per replication, evaluation date and model, and the summary table.

    """

    unknown = [m for m in models if m not in STUDY_MODELS]
    if unknown:
        raise ValueError(f"models should be among {STUDY_MODELS}, got {unknown}")
    if replications < 1:
        raise ValueError("replications must be at least 1")
    cal = cal or default_calendar(cfg.origin)
    opts = opts or FitOptions()
    eval_days = sorted(to_index(d, cfg.origin) for d in eval_dates)
    if eval_days[0] < cfg.first_day or eval_days[-1] + gap > cfg.last_day:
        raise ValueError("every evaluation date plus the gap must lie within the scenario")

    if "approximate" in models and bins is None:
        first = simulate_scenario(cfg, cal)
        bins = propose_bins(hazard_table(triangle_from_events(first.events, eval_days[0] + gap)))

    configs = [dataclasses.replace(cfg, seed=cfg.seed + r) for r in range(replications)]
    if progress_bar:
        print("Running %s replications of scenario %s..." % (replications, cfg.name))
        configs = tqdm(configs)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_study_replication)(c, r, eval_days, models, bins, gap, cal, opts)
        for r, c in enumerate(configs)
    )
    frame = pd.DataFrame([row for rows in results for row in rows])
    frame["eval_date"] = to_datetime64(frame["eval_date"].to_numpy(), cfg.origin)
    return frame, summarize_study(frame)
