import numpy as np
import pytest

from hidden_events.calendars import (
    CovariateSpec,
    DelayBinsEffect,
    Intercept,
    ReportingHoliday,
    ReportingWeekend,
    to_index,
)
from hidden_events.timechange import (
    MAX_HORIZON,
    ExposureModel,
    ExposureSchedule,
    TimeChangedDistribution,
    cell_probability,
    exposure,
    exposure_schedule,
    observed_probability,
    phi,
)

KINDS = [TimeChangedDistribution("exponential"), TimeChangedDistribution("lognormal", 0.7)]


def _model(rng):
    spec = CovariateSpec((Intercept(), ReportingWeekend(), ReportingHoliday(), DelayBinsEffect([0, 1, 4, 9])))
    gamma = np.concatenate([[np.log(0.2)], rng.normal(0.0, 0.5, spec.n_columns - 1)])
    return ExposureModel(spec, gamma)


class TestDistribution:
    @pytest.mark.parametrize("dist", KINDS)
    def test_cdf_sf_complement(self, dist):
        u = np.array([0.0, 1e-3, 0.5, 1.0, 3.0, 40.0])
        np.testing.assert_allclose(dist.cdf(u) + dist.sf(u), 1.0, atol=1e-15)

    @pytest.mark.parametrize("dist", KINDS)
    def test_pdf_is_cdf_derivative(self, dist):
        u = np.linspace(0.05, 4.0, 40)
        h = 1e-6
        numeric = (dist.cdf(u + h) - dist.cdf(u - h)) / (2 * h)
        np.testing.assert_allclose(dist.pdf(u), numeric, rtol=1e-6)

    @pytest.mark.parametrize("dist", KINDS)
    def test_pdf_derivative(self, dist):
        u = np.linspace(0.05, 4.0, 40)
        h = 1e-6
        numeric = (dist.pdf(u + h) - dist.pdf(u - h)) / (2 * h)
        np.testing.assert_allclose(dist.pdf_derivative(u), numeric, rtol=1e-5, atol=1e-8)

    def test_sigma_derivatives(self):
        dist = TimeChangedDistribution("lognormal", 0.7)
        rho, h = np.log(0.7), 1e-6
        up, down = dist.with_log_sigma(rho + h), dist.with_log_sigma(rho - h)
        u = np.linspace(0.05, 4.0, 40)
        np.testing.assert_allclose(dist.cdf_rho(u), (up.cdf(u) - down.cdf(u)) / (2 * h), atol=1e-8)
        np.testing.assert_allclose(dist.pdf_rho(u), (up.pdf(u) - down.pdf(u)) / (2 * h), atol=1e-7)
        np.testing.assert_allclose(
            dist.cdf_rho2(u), (up.cdf_rho(u) - down.cdf_rho(u)) / (2 * h), atol=1e-7
        )

    def test_lognormal_median(self):
        assert float(TimeChangedDistribution("lognormal", 2.0).cdf(1.0)) == 0.5

    def test_exponential_ignores_sigma(self):
        assert TimeChangedDistribution("exponential", 3.0).sigma == 1.0
        assert TimeChangedDistribution().n_params == 0

    @pytest.mark.parametrize("kind, sigma", [("weibull", 1.0), ("lognormal", 0.0), ("lognormal", -1.0)])
    def test_invalid(self, kind, sigma):
        with pytest.raises(ValueError):
            TimeChangedDistribution(kind, sigma)

    def test_serialization(self):
        dist = TimeChangedDistribution("lognormal", 1.3)
        assert TimeChangedDistribution.from_dict(dist.to_dict()) == dist


class TestSchedule:
    def test_phi_is_monotone(self, cal):
        sched = exposure_schedule(_model(np.random.default_rng(0)), to_index("2003-12-20"), cal, horizon=30)
        values = [phi(sched.t, d, sched) for d in range(31)]
        assert values[0] == 0.0
        assert np.all(np.diff(values) > 0)

    def test_phi_outside_horizon(self):
        sched = ExposureSchedule(5, np.ones(3))
        with pytest.raises(ValueError):
            phi(5, 4, sched)
        with pytest.raises(ValueError):
            phi(6, 1, sched)

    def test_exposure_matches_schedule(self, cal):
        model = _model(np.random.default_rng(1))
        t = to_index("2003-04-15")
        sched = exposure_schedule(model, t, cal, horizon=10)
        assert sched.alphas[6] == pytest.approx(exposure(model, t, t + 6, cal))

    @pytest.mark.parametrize("dist", KINDS)
    def test_telescoping(self, cal, dist):
        rng = np.random.default_rng(7)
        start = to_index("2002-11-01")
        for _ in range(50):
            model = _model(rng)
            t = start + int(rng.integers(0, 400))
            H = int(rng.integers(0, 60))
            sched = exposure_schedule(model, t, cal, horizon=H + 1)
            total = sum(cell_probability(t, s, sched, dist) for s in range(t, t + H + 1))
            assert abs(total - observed_probability(t, t + H, sched, dist)) < 1e-12

    @pytest.mark.parametrize("dist", KINDS)
    def test_horizon_rule(self, cal, dist):
        model = _model(np.random.default_rng(3))
        t = to_index("2003-12-24")
        sched = exposure_schedule(model, t, cal, dist=dist)
        assert float(dist.sf(sched.cumulative[-1])) < 1e-6
        assert float(dist.sf(sched.cumulative[-2])) >= 1e-6
        assert sched.horizon <= MAX_HORIZON

    def test_horizon_cap(self, cal):
        spec = CovariateSpec((Intercept(),))
        slow = ExposureModel(spec, np.array([np.log(1e-6)]))
        sched = exposure_schedule(slow, 100, cal, max_horizon=200)
        assert sched.horizon == 200

    def test_cell_probabilities_sum_to_one(self, cal):
        model = _model(np.random.default_rng(5))
        dist = TimeChangedDistribution("lognormal", 1.0)
        t = to_index("2003-06-02")
        sched = exposure_schedule(model, t, cal, dist=dist)
        total = sum(cell_probability(t, s, sched, dist) for s in range(t, t + sched.horizon))
        assert 1.0 - 1e-6 < total <= 1.0 + 1e-12

    def test_exponential_scaling(self, cal):
        # Scaling every exposure by c and the delay rate by c leaves the cell probabilities unchanged
        c = 2.5
        model = _model(np.random.default_rng(9))
        t = to_index("2003-03-03")
        alphas = exposure_schedule(model, t, cal, horizon=20).alphas
        dist = TimeChangedDistribution()
        base = ExposureSchedule(t, alphas)
        scaled = ExposureSchedule(t, c * alphas)
        for s in range(t, t + 20):
            lo, hi = phi(t, s - t, scaled) / c, phi(t, s - t + 1, scaled) / c
            p_scaled = float(dist.cdf(hi) - dist.cdf(lo))
            assert abs(p_scaled - cell_probability(t, s, base, dist)) < 1e-12

    def test_non_positive_exposures(self):
        with pytest.raises(ValueError):
            ExposureSchedule(1, np.array([0.1, 0.0]))
