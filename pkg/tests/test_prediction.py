import dataclasses

import numpy as np
import pandas as pd
import pytest

from conftest import MODERATE, fixed_fit, random_triangle
from hidden_events.calendars import (
    CovariateSpec,
    DelayBinsEffect,
    Intercept,
    ReportingWeekend,
    exact_scenario_spec,
    to_date,
    to_index,
)
from hidden_events.counts import EventDataset, actual_hidden_count, triangle_from_events
from hidden_events.prediction import (
    BacktestResult,
    backtest,
    estimate_lambda,
    occurrence_intensity,
    percentage_error,
    predict_cells,
)
from hidden_events.simulate import exact_scenario_model, scenario_config, simulate_scenario
from hidden_events.timechange import TimeChangedDistribution, cell_probability, exposure_schedule

INTERCEPT = CovariateSpec((Intercept(),))
SPEC = CovariateSpec((Intercept(), ReportingWeekend(), DelayBinsEffect([0, 2, 6])))


def _gamma(rng):
    return np.concatenate([[np.log(0.25)], rng.normal(0.0, 0.3, SPEC.n_columns - 1)])


@pytest.fixture
def single_day():
    # ten events reported on their occurrence date
    t = to_index("2003-06-16")
    events = EventDataset.from_days([t] * 10, [t] * 10)
    return t, triangle_from_events(events, t)


class TestHandExample:
    def test_unbounded_horizon(self, single_day, cal):
        t, triangle = single_day
        report = predict_cells(triangle, fixed_fit(INTERCEPT, [np.log(0.1)]), t, cal=cal)
        lam = 10 / (1 - np.exp(-0.1))
        assert report.lambda_hat[0] == pytest.approx(lam, rel=1e-12)
        assert report.p_observed[0] == pytest.approx(1 - np.exp(-0.1), rel=1e-12)
        assert report.hidden_total == pytest.approx(lam * np.exp(-0.1), rel=1e-9)
        assert report.observed_gap == 0
        assert report.ibnr_total == report.hidden_total

    def test_one_day_horizon(self, single_day, cal):
        t, triangle = single_day
        report = predict_cells(triangle, fixed_fit(INTERCEPT, [np.log(0.1)]), t, horizon=t + 1, cal=cal)
        lam = 10 / (1 - np.exp(-0.1))
        assert len(report.future_cells) == 1
        assert report.hidden_total == pytest.approx(lam * (np.exp(-0.1) - np.exp(-0.2)), rel=1e-9)
        assert report.future_cells["observation_date"].iloc[0] == pd.Timestamp(to_date(t + 1))

    def test_horizon_before_computation_date(self, single_day, cal):
        t, triangle = single_day
        with pytest.warns(RuntimeWarning, match="horizon precedes"):
            report = predict_cells(triangle, fixed_fit(INTERCEPT, [np.log(0.1)]), t, horizon=t, cal=cal)
        assert report.hidden_total == 0.0
        assert len(report.future_cells) == 0

    def test_reliability_floor(self, single_day, cal):
        t, triangle = single_day
        with pytest.warns(RuntimeWarning, match="unreliable"):
            report = predict_cells(triangle, fixed_fit(INTERCEPT, [np.log(1e-6)]), t, cal=cal, max_horizon=50)
        assert report.unreliable_dates == [to_date(t)]


class TestPrediction:
    @pytest.mark.parametrize("dist", [TimeChangedDistribution(), TimeChangedDistribution("lognormal", 0.8)])
    def test_hidden_total_is_unobserved_mass(self, cal, dist):
        rng = np.random.default_rng(31)
        triangle = random_triangle(rng, n_days=40)
        result = fixed_fit(SPEC, _gamma(rng), dist)
        report = predict_cells(triangle, result, triangle.eval_date, cal=cal)
        expected = np.sum(report.lambda_hat * (1 - report.p_observed))
        assert report.hidden_total == pytest.approx(expected, rel=1e-9)

    def test_batches_do_not_change_the_result(self, cal):
        rng = np.random.default_rng(5)
        triangle = random_triangle(rng, n_days=30)
        result = fixed_fit(SPEC, _gamma(rng))
        whole = predict_cells(triangle, result, triangle.eval_date, cal=cal)
        split = predict_cells(triangle, result, triangle.eval_date, cal=cal, max_batch_size=500)
        assert whole.hidden_total == pytest.approx(split.hidden_total, rel=1e-12)
        np.testing.assert_allclose(whole.lambda_hat, split.lambda_hat, rtol=1e-12)

    def test_longer_horizon_never_predicts_less(self, cal):
        rng = np.random.default_rng(16)
        triangle = random_triangle(rng, n_days=30)
        result = fixed_fit(SPEC, _gamma(rng))
        tau = triangle.eval_date
        totals = [
            predict_cells(triangle, result, tau, horizon=tau + h, cal=cal).hidden_total
            for h in (1, 5, 20, 80)
        ]
        totals.append(predict_cells(triangle, result, tau, cal=cal).hidden_total)
        assert np.all(np.diff(totals) >= -1e-9)

    def test_gap_counts_are_added(self, cal):
        rng = np.random.default_rng(9)
        triangle = random_triangle(rng, n_days=30)
        eval_date = triangle.eval_date - 5
        report = predict_cells(triangle, fixed_fit(SPEC, _gamma(rng)), eval_date, cal=cal)
        assert report.observed_gap == triangle.gap_counts(eval_date)
        assert report.ibnr_total == pytest.approx(report.observed_gap + report.hidden_total)

    def test_future_cells(self, cal):
        rng = np.random.default_rng(10)
        triangle = random_triangle(rng, n_days=30)
        eval_date, computation = triangle.eval_date - 3, triangle.eval_date - 1
        horizon = computation + 20
        report = predict_cells(triangle, fixed_fit(SPEC, _gamma(rng)), eval_date, computation, horizon, cal)
        cells = report.future_cells
        assert list(cells.columns) == ["occurrence_date", "observation_date", "expected"]
        assert cells["occurrence_date"].max() <= pd.Timestamp(to_date(eval_date))
        assert cells["observation_date"].min() > pd.Timestamp(to_date(computation))
        assert cells["observation_date"].max() <= pd.Timestamp(to_date(horizon))
        assert np.all(cells["expected"] >= 0)
        assert report.by_future_date.sum() == pytest.approx(report.hidden_total)
        assert report.by_future_month.sum() == pytest.approx(report.hidden_total)

    def test_computation_date_truncates(self, cal):
        rng = np.random.default_rng(12)
        triangle = random_triangle(rng, n_days=30)
        result = fixed_fit(SPEC, _gamma(rng))
        computation = triangle.eval_date - 4
        early = predict_cells(triangle, result, computation - 2, computation, cal=cal)
        again = predict_cells(triangle.truncate(computation), result, computation - 2, cal=cal)
        assert early.hidden_total == pytest.approx(again.hidden_total, rel=1e-12)
        assert early.observed_gap == again.observed_gap

    def test_invalid_dates(self, cal):
        triangle = random_triangle(np.random.default_rng(0))
        result = fixed_fit(SPEC, _gamma(np.random.default_rng(0)))
        with pytest.raises(ValueError):
            predict_cells(triangle, result, triangle.eval_date, triangle.eval_date + 1, cal=cal)
        with pytest.raises(ValueError):
            predict_cells(triangle, result, triangle.eval_date, triangle.eval_date - 1, cal=cal)

    def test_estimate_lambda_matches_report(self, cal):
        rng = np.random.default_rng(14)
        triangle = random_triangle(rng, n_days=25)
        result = fixed_fit(SPEC, _gamma(rng))
        report = predict_cells(triangle, result, triangle.eval_date, cal=cal)
        for i in (0, 10, len(report.occurrence) - 1):
            t = int(report.occurrence[i])
            assert estimate_lambda(triangle, result, t, cal) == pytest.approx(report.lambda_hat[i], rel=1e-12)
        with pytest.raises(ValueError):
            estimate_lambda(triangle, result, triangle.eval_date + 1, cal)

    def test_report_dict(self, cal):
        rng = np.random.default_rng(15)
        triangle = random_triangle(rng)
        report = predict_cells(triangle, fixed_fit(SPEC, _gamma(rng)), triangle.eval_date - 2, cal=cal)
        d = report.to_dict()
        assert d["ibnr_total"] == report.ibnr_total
        assert d["horizon_date"] is None
        assert d["eval_date"] == to_date(triangle.eval_date - 2)
        assert len(report.lambda_frame()) == len(report.occurrence)


class TestPercentageError:
    def test_values(self):
        assert percentage_error(80, 100) == 20.0
        assert percentage_error(125, 100) == -25.0

    def test_no_actual_events(self):
        with pytest.warns(RuntimeWarning, match="undefined"):
            assert np.isnan(percentage_error(10, 0))

    def test_occurrence_intensity_vector(self):
        np.testing.assert_allclose(occurrence_intensity([4, 0, 3], [0.5, 0.0, 0.75]), [8.0, 0.0, 4.0])


class TestBacktest:
    @pytest.fixture(scope="class")
    def result(self, exponential_scenario, cal):
        eval_dates = [to_index(d) for d in ("2003-06-10", "2003-06-11", "2003-06-12")]
        return backtest(
            exponential_scenario.events,
            eval_dates,
            exact_scenario_spec(),
            TimeChangedDistribution(),
            cal,
            gap=5,
            refit_every=2,
        )

    def test_frame(self, result, exponential_scenario):
        frame = result.frame
        assert list(frame.columns) == [
            "eval_date",
            "computation_date",
            "predicted",
            "observed_gap",
            "hidden_total",
            "actual",
            "pe",
            "flagged",
            "message",
        ]
        assert len(frame) == 3
        assert not frame["flagged"].any()
        tau = to_index("2003-06-10")
        assert frame["actual"].iloc[0] == actual_hidden_count(exponential_scenario.events, tau)
        np.testing.assert_allclose(frame["predicted"], frame["observed_gap"] + frame["hidden_total"])

    def test_summary(self, result):
        summary = result.summary()
        assert summary["n_dates"] == 3
        assert summary["n_flagged"] == 0
        assert abs(summary["mean_pe"]) < 40
        assert np.isfinite(summary["sd_pe"])

    def test_flagged_rows_are_left_out(self):
        frame = pd.DataFrame(
            {"eval_date": [1, 2, 3], "pe": [10.0, np.nan, -30.0], "flagged": [False, True, True]}
        )
        summary = BacktestResult(frame).summary()
        assert summary["mean_pe"] == 10.0
        assert np.isnan(summary["sd_pe"])
        assert summary["n_flagged"] == 2

    def test_dates_out_of_range(self, exponential_scenario, cal):
        with pytest.raises(ValueError):
            backtest(exponential_scenario.events, [to_index("2002-12-01")], exact_scenario_spec(), cal=cal)
        with pytest.raises(ValueError):
            backtest(exponential_scenario.events, [], exact_scenario_spec(), cal=cal)
        with pytest.raises(ValueError):
            backtest(
                exponential_scenario.events, [to_index("2003-06-10")], exact_scenario_spec(), refit_every=0
            )


class TestScenarioCells:
    def test_mean_prediction_matches_thinned_intensity(self, cal):
        base = scenario_config(
            "baseline", delay=TimeChangedDistribution("exponential"), start="2003-06-01", end="2003-06-30"
        )
        base = dataclasses.replace(base, exposure=MODERATE)
        truth = fixed_fit(exact_scenario_spec(), exact_scenario_model(base).gamma)
        t, computation = to_index("2003-06-16"), to_index("2003-06-19")
        s = computation + 4
        schedule = exposure_schedule(truth.model, t, cal, horizon=s - t + 1)
        expected = base.intensity * cell_probability(t, s, schedule, truth.dist)

        predicted = []
        for seed in range(300):
            events = simulate_scenario(dataclasses.replace(base, seed=seed), cal).events
            triangle = triangle_from_events(events, computation)
            report = predict_cells(triangle, truth, computation, horizon=s, cal=cal)
            cells = report.future_cells
            cell = cells[
                (cells["occurrence_date"] == pd.Timestamp(to_date(t)))
                & (cells["observation_date"] == pd.Timestamp(to_date(s)))
            ]
            # no event observed yet: the intensity estimate is zero
            predicted.append(float(cell["expected"].sum()))
        predicted = np.array(predicted)
        standard_error = predicted.std(ddof=1) / np.sqrt(len(predicted))
        assert abs(predicted.mean() - expected) <= 3 * standard_error

    def test_sunday_cells_are_suppressed(self, cal):
        cfg = scenario_config(
            "baseline",
            seed=4,
            delay=TimeChangedDistribution("exponential"),
            start="2003-08-01",
            end="2003-09-30",
        )
        events = simulate_scenario(cfg, cal).events
        truth = fixed_fit(exact_scenario_spec(), exact_scenario_model(cfg).gamma)
        computation = to_index("2003-09-30")
        report = predict_cells(
            triangle_from_events(events, computation), truth, computation, horizon=computation + 28, cal=cal
        )
        daily = report.by_future_date
        weekday = daily.index.dayofweek
        sundays = daily[weekday == 6]
        assert len(sundays) == 4
        assert np.all(sundays < 0.05 * daily[weekday < 5].mean())
