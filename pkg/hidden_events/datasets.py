# MIT License

# Copyright (c) 2024 hidden-events developers

# Datasets
# ..................................................................................................................
# ..................................................................................................................

import os
from typing import Optional

import numpy as np
import pandas as pd

from .calendars import DEFAULT_ORIGIN, DateLike, HolidayCalendar, parse_date, to_date
from .counts import EventDataset
from .errors import DataError
from .simulate import SCALES, SCENARIOS, SimulatedDataset, scenario_config, simulate_scenario

EVENT_COLUMNS = ["occurrence_date", "observation_date"]


def parse_events_csv(
    path: str, origin: DateLike = DEFAULT_ORIGIN, verbose: bool = True
) -> EventDataset:

    """

    Read an event file with one record per line: occurrence_date,observation_date (ISO dates).

    Records observed before their occurrence date are dropped with a warning.

    Args:
        path: CSV file with a header line
        origin: date of day index 1
        verbose: print a summary of the records read (default is True)

    Returns:
        The validated EventDataset.

    """

    origin = parse_date(origin)
    if not os.path.exists(path):
        raise DataError(f"event file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"event file {path} is empty")
    except pd.errors.ParserError as err:
        raise DataError(f"event file {path} is malformed: {err}")

    missing = [c for c in EVENT_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"event file {path} lacks the column(s) {missing}")
    if len(df) == 0:
        raise DataError(f"event file {path} has no records")

    parsed = {}
    for column in EVENT_COLUMNS:
        values = pd.to_datetime(df[column].str.strip(), format="%Y-%m-%d", errors="coerce")
        bad = np.flatnonzero(values.isna().to_numpy())
        if len(bad):
            # data starts on line 2, after the header
            line = int(bad[0]) + 2
            raise DataError(f"{path}, line {line}: invalid {column} {df[column].iloc[bad[0]]!r}")
        parsed[column] = values
    if parsed["occurrence_date"].min() < pd.Timestamp(origin):
        raise DataError(f"{path}: occurrence dates before the calendar origin {origin}")

    events = EventDataset.from_dates(
        parsed["occurrence_date"], parsed["observation_date"], origin, warn=True
    )
    if len(events) == 0:
        raise DataError(f"event file {path} has no valid records")
    if verbose:
        print(
            "Read %s events occurred %s to %s (%s dropped)."
            % (
                len(events),
                to_date(events.first_day, origin),
                to_date(int(events.occurrence.max()), origin),
                events.dropped,
            )
        )
    return events


def write_events_csv(events: EventDataset, path: str):
    df = events.to_frame()
    for column in EVENT_COLUMNS:
        df[column] = df[column].dt.strftime("%Y-%m-%d")
    df.to_csv(path, index=False, lineterminator="\n")


def list_scenarios():
    s = """
    List of available scenarios:

    baseline
    - constant occurrence intensity
    - exposure 0.10 * 0.20^(Sat + unofficial holiday) * 0.01^(Sun + national holiday)

    volatile
    - two-state Markov intensity (good 0.9 -> good, bad 0.6 -> good), four times higher in the bad state
    - baseline exposure

    low-frequency
    - 2 events a day
    - baseline exposure

    online-reporting
    - baseline occurrences
    - exposure 0.10 * 0.50^(Sat + unofficial holiday) * 0.20^(Sun + national holiday) from 2003-01-01

    Scales: 'desk' (20 events a day, Sep 2001 - Sep 2004), 'full' (100 a day, Jan 1998 - Sep 2004)
    Time-changed delay: lognormal, sigma = 1
    - function call: load_scenario(name, scale, seed)
    """

    return s


def load_scenario(
    name: str,
    scale: str = "desk",
    seed: int = 0,
    cal: Optional[HolidayCalendar] = None,
    n_jobs: int = 1,
    progress_bar: bool = False,
) -> SimulatedDataset:

    """

    Simulate one of the reference scenarios.

    Args:
        name: 'baseline', 'volatile', 'low-frequency' or 'online-reporting'
        scale: 'desk' or 'full'
        seed: random seed
        cal: holiday calendar (default: packaged Dutch calendar)
        n_jobs: number of parallel workers
        progress_bar: print a progress bar (default is False)

    Returns:
        The simulated dataset.

    """

    if name not in SCENARIOS:
        raise ValueError(f"name should be one of {SCENARIOS}")
    if scale not in SCALES:
        raise ValueError(f"scale should be one of {tuple(SCALES)}")
    cfg = scenario_config(name, scale, seed)
    return simulate_scenario(cfg, cal, n_jobs=n_jobs, progress_bar=progress_bar)

