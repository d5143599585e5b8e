from .binning import BinningOptions, DelayBins, HazardTable, hazard_table, kaplan_meier, propose_bins
from .calendars import (
    CovariateSpec,
    HolidayCalendar,
    approximate_spec,
    default_calendar,
    design_vector,
    dutch_calendar,
    exact_scenario_spec,
    load_holidays,
    make_spec,
    six_effect_spec,
    to_date,
    to_index,
)
from .chainladder import AggregateTriangle, aggregate, development_factors, ibnr_estimate
from .counts import CountTriangle, EventDataset, actual_hidden_count, triangle_from_events
from .datasets import list_scenarios, load_scenario, parse_events_csv, write_events_csv
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    EmptyTriangleError,
    FitError,
    HiddenEventsError,
    NonIdentifiableError,
)
from .likelihood import (
    FitOptions,
    FitResult,
    confidence_intervals,
    fit,
    hessian,
    loglik_exponential,
    loglik_generic,
    score,
)
from .prediction import BacktestResult, PredictionReport, backtest, estimate_lambda, predict_cells
from .simulate import ScenarioConfig, SimulatedDataset, scenario_config, simulate_scenario
from .timechange import ExposureModel, TimeChangedDistribution, cell_probability, exposure_schedule, phi
from .wrappers import fit_model, predict_hidden, scenario_study

__all__ = [
    "AggregateTriangle",
    "BacktestResult",
    "BinningOptions",
    "ConfigError",
    "ConvergenceError",
    "CountTriangle",
    "CovariateSpec",
    "DataError",
    "DelayBins",
    "EmptyTriangleError",
    "EventDataset",
    "ExposureModel",
    "FitError",
    "FitOptions",
    "FitResult",
    "HazardTable",
    "HiddenEventsError",
    "HolidayCalendar",
    "NonIdentifiableError",
    "PredictionReport",
    "ScenarioConfig",
    "SimulatedDataset",
    "TimeChangedDistribution",
    "actual_hidden_count",
    "aggregate",
    "approximate_spec",
    "backtest",
    "cell_probability",
    "confidence_intervals",
    "default_calendar",
    "design_vector",
    "development_factors",
    "dutch_calendar",
    "estimate_lambda",
    "exact_scenario_spec",
    "exposure_schedule",
    "fit",
    "fit_model",
    "hazard_table",
    "hessian",
    "ibnr_estimate",
    "kaplan_meier",
    "list_scenarios",
    "load_holidays",
    "load_scenario",
    "loglik_exponential",
    "loglik_generic",
    "make_spec",
    "parse_events_csv",
    "phi",
    "predict_cells",
    "predict_hidden",
    "propose_bins",
    "scenario_config",
    "scenario_study",
    "score",
    "simulate_scenario",
    "six_effect_spec",
    "to_date",
    "to_index",
    "triangle_from_events",
    "write_events_csv",
]
__version__ = "0.1.0"
