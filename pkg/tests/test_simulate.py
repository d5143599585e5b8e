import dataclasses
import json

import numpy as np
import pytest

from hidden_events.calendars import default_calendar, to_index, weekday_codes
from hidden_events.counts import actual_hidden_count
from hidden_events.errors import ConfigError
from hidden_events.simulate import (
    ExposureFormula,
    ScenarioConfig,
    exact_scenario_model,
    markov_states,
    observation_delay,
    occurrence_generator,
    rolling_hidden_counts,
    scenario_config,
    scenario_exposure,
    simulate_delays,
    simulate_observation_date,
    simulate_occurrences,
    simulate_scenario,
)
from hidden_events.timechange import TimeChangedDistribution, cell_probability, exposure_schedule
from hidden_events.utils import dumps


def _short(name="baseline", seed=3, **kwargs):
    return scenario_config(name, seed=seed, start="2003-01-01", end="2003-03-31", **kwargs)


class TestDeterminism:
    def test_same_seed_same_events(self, cal):
        a = simulate_scenario(_short(), cal)
        b = simulate_scenario(_short(), cal)
        np.testing.assert_array_equal(a.events.occurrence, b.events.occurrence)
        np.testing.assert_array_equal(a.events.observation, b.events.observation)

    def test_worker_count_does_not_matter(self, cal):
        serial = simulate_scenario(_short("volatile"), cal)
        parallel = simulate_scenario(_short("volatile"), cal, n_jobs=2, chunk_size=16)
        np.testing.assert_array_equal(serial.events.occurrence, parallel.events.occurrence)
        np.testing.assert_array_equal(serial.events.observation, parallel.events.observation)

    def test_seeds_differ(self, cal):
        a = simulate_scenario(_short(seed=1), cal)
        b = simulate_scenario(_short(seed=2), cal)
        assert not np.array_equal(a.occurrences.to_numpy(), b.occurrences.to_numpy())

    def test_dataset(self, cal):
        dataset = simulate_scenario(_short(), cal)
        assert len(dataset.events) == dataset.occurrences.sum()
        assert np.all(dataset.events.observation >= dataset.events.occurrence)
        assert dataset.events.first_day >= dataset.config.first_day
        assert dataset.events.occurrence.max() <= dataset.config.last_day

    def test_split(self, cal):
        dataset = simulate_scenario(_short(), cal)
        tau = to_index("2003-03-01")
        triangle, actual = dataset.split(tau, tau + 5)
        assert triangle.eval_date == tau + 5
        assert actual == actual_hidden_count(dataset.events, tau)
        with pytest.raises(ValueError):
            dataset.split(tau, tau - 1)

    def test_calendar_origin_must_match(self):
        with pytest.raises(ConfigError):
            simulate_scenario(_short(), default_calendar("2000-01-01"))


class TestExposure:
    @pytest.mark.parametrize("name", ["baseline", "online-reporting"])
    def test_exact_model_reproduces_scenario_exposure(self, cal, name):
        cfg = scenario_config(name)
        model = exact_scenario_model(cfg)
        s = np.arange(to_index("2002-12-01"), to_index("2003-02-28"))
        t = s - 3
        np.testing.assert_allclose(model.exposures(t, s, cal), scenario_exposure(cfg, s, cal), rtol=1e-12)

    def test_breakpoint_switches_formula(self, cal):
        cfg = scenario_config("online-reporting")
        # Sundays before and after the launch
        before, after = to_index("2002-12-29"), to_index("2003-01-05")
        np.testing.assert_allclose(scenario_exposure(cfg, [before, after], cal), [0.001, 0.02])

    def test_sunday_reports_rise_after_launch(self, cal):
        cfg = scenario_config("online-reporting", seed=8, start="2002-09-01", end="2003-04-30")
        events = simulate_scenario(cfg, cal).events
        observation = events.observation[events.observation <= cfg.last_day]
        sunday = weekday_codes(observation, cfg.origin) == 6
        after = observation >= to_index(cfg.breakpoint, cfg.origin)
        share_before, share_after = sunday[~after].mean(), sunday[after].mean()
        assert share_after > 5 * share_before
        assert share_after > 0.02

    def test_formula_bounds(self):
        with pytest.raises(ConfigError):
            ExposureFormula(0.0, 0.5, 0.5)
        with pytest.raises(ConfigError):
            ExposureFormula(0.1, 1.5, 0.5)


class TestDelays:
    @pytest.mark.parametrize("day", ["2003-09-01", "2003-09-05", "2003-09-13"])
    def test_frequencies_match_cell_probabilities(self, cal, day):
        cfg = scenario_config("baseline", seed=17)
        t = to_index(day)
        n = 100_000
        _, observation = simulate_delays(cfg, np.array([t]), np.array([n]), cal)
        sched = exposure_schedule(exact_scenario_model(cfg), t, cal, dist=cfg.delay)
        p = np.array([cell_probability(t, s, sched, cfg.delay) for s in range(t, t + sched.horizon)])
        freq = np.bincount(observation - t, minlength=sched.horizon)[: sched.horizon] / n
        se = np.maximum(np.sqrt(p * (1 - p) / n), 1e-4)
        assert np.all(np.abs(freq - p) < 5 * se)

    def test_exponential_weekday_grid(self, cal):
        cfg = scenario_config("baseline", seed=23, delay=TimeChangedDistribution("exponential"))
        model = exact_scenario_model(cfg)
        n = 100_000
        # one occurrence date per weekday, delays 0 to 13
        for t in range(to_index("2003-09-01"), to_index("2003-09-08")):
            _, observation = simulate_delays(cfg, np.array([t]), np.array([n]), cal)
            sched = exposure_schedule(model, t, cal, horizon=14)
            p = np.array([cell_probability(t, t + d, sched, cfg.delay) for d in range(14)])
            freq = np.bincount(observation - t, minlength=14)[:14] / n
            se = np.maximum(np.sqrt(p * (1 - p) / n), 1e-5)
            assert np.all(np.abs(freq - p) < 4 * se)

    def test_observation_delay(self):
        assert int(observation_delay(0.0, [0.5, 0.5])) == 0
        assert int(observation_delay(0.5, [0.5, 0.5])) == 1
        assert int(observation_delay(5.0, [1.0, 1.0])) == 2

    def test_single_observation_date(self, cal):
        cfg = _short()
        t = to_index("2003-02-01")
        s = simulate_observation_date(t, cfg, np.random.default_rng(0), cal)
        assert s >= t


class TestOccurrences:
    def test_markov_mean(self):
        cfg = scenario_config("volatile", start="1996-01-01", end="2050-12-31")
        counts = simulate_occurrences(cfg)
        assert counts.mean() == pytest.approx(cfg.stationary_intensity(), rel=0.03)
        assert cfg.stationary_intensity() == pytest.approx(200 / 7)

    def test_markov_states(self):
        cfg = scenario_config("volatile")
        states = markov_states(cfg, occurrence_generator(cfg), 50_000)
        assert states[0] == 0
        assert states.mean() == pytest.approx(1 / 7, abs=0.01)
        # probability of staying bad
        stay = np.mean(states[1:][states[:-1] == 1])
        assert stay == pytest.approx(0.4, abs=0.02)

    def test_poisson_mean(self):
        cfg = scenario_config("baseline", start="1996-01-01", end="2005-12-31")
        counts = simulate_occurrences(cfg)
        assert counts.mean() == pytest.approx(20.0, rel=0.02)
        assert counts.var() == pytest.approx(20.0, rel=0.1)

    def test_low_frequency(self):
        assert scenario_config("low-frequency").intensity == 2.0
        assert scenario_config("baseline", "full").intensity == 100.0


class TestScenarioConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(start="2003-02-01", end="2003-01-01"),
            dict(intensity=0.0),
            dict(bad_intensity=-1.0),
            dict(transition=((0.5, 0.4), (0.6, 0.4))),
            dict(breakpoint="2003-01-01"),
            dict(seed=-1),
            dict(start="1990-01-01"),
        ],
    )
    def test_invalid(self, kwargs):
        base = dict(name="custom", start="2003-01-01", end="2003-06-30", intensity=10.0)
        with pytest.raises(ConfigError):
            ScenarioConfig(**{**base, **kwargs})

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            scenario_config("stormy")
        with pytest.raises(ConfigError):
            scenario_config("baseline", scale="huge")

    def test_dict_round_trip(self):
        cfg = scenario_config("online-reporting", seed=4, delay=TimeChangedDistribution("lognormal", 0.7))
        assert ScenarioConfig.from_dict(json.loads(dumps(cfg.to_dict()))) == cfg

    def test_replace_keeps_validation(self):
        with pytest.raises(ConfigError):
            dataclasses.replace(_short(), intensity=-2.0)


class TestRollingHidden:
    def test_matches_actual_hidden_count(self, exponential_scenario):
        events = exponential_scenario.events
        dates = [to_index(d) for d in ("2003-02-01", "2003-04-15", "2003-06-30")]
        rolling = rolling_hidden_counts(events, dates)
        assert rolling.tolist() == [actual_hidden_count(events, tau) for tau in dates]
        assert rolling.index.name == "date"
