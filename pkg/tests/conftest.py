import dataclasses

import numpy as np
import pytest

from hidden_events.calendars import default_calendar, to_index
from hidden_events.counts import EventDataset, triangle_from_events
from hidden_events.likelihood import FitResult
from hidden_events.simulate import ExposureFormula, scenario_config, simulate_scenario
from hidden_events.timechange import ExposureModel, TimeChangedDistribution

# heavy days keep a fifth of the base exposure
MODERATE = ExposureFormula(0.10, 0.50, 0.20)


def random_triangle(rng, n_days=20, start="2003-04-10", n_events=400, p=0.3):
    """Events with geometric delays on n_days consecutive occurrence dates, observed by the last one."""
    t0 = to_index(start)
    occurrence = t0 + rng.integers(0, n_days, size=n_events)
    delays = rng.geometric(p, size=n_events) - 1
    events = EventDataset.from_days(occurrence, occurrence + delays)
    return triangle_from_events(events, t0 + n_days - 1)


def fixed_fit(spec, gamma, dist=None):
    """A FitResult holding given parameters, as if they had been estimated."""
    dist = dist or TimeChangedDistribution()
    n_theta = spec.n_columns + dist.n_params
    return FitResult(
        model=ExposureModel(spec, np.asarray(gamma, dtype=float)),
        dist=dist,
        loglik=0.0,
        score=np.zeros(n_theta),
        hessian=-np.eye(n_theta),
        iterations=0,
        converged=True,
    )


@pytest.fixture(scope="session")
def cal():
    return default_calendar()


@pytest.fixture(scope="session")
def exponential_scenario(cal):
    cfg = scenario_config(
        "baseline",
        seed=11,
        delay=TimeChangedDistribution("exponential"),
        start="2003-01-01",
        end="2003-06-30",
    )
    return simulate_scenario(dataclasses.replace(cfg, exposure=MODERATE), cal)
