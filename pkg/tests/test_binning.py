import numpy as np
import pytest

from hidden_events.binning import (
    BinningOptions,
    DelayBins,
    HazardTable,
    delay_model_survival,
    hazard_table,
    kaplan_meier,
    km_equivalence_check,
    propose_bins,
)
from hidden_events.counts import EventDataset, triangle_from_events


def product_limit(delays):
    """Textbook Kaplan-Meier estimate over delays 0..max, one event at a time."""
    delays = np.sort(np.asarray(delays))
    survival, at_risk, out = 1.0, len(delays), []
    for d in range(delays[-1] + 1):
        events = int(np.sum(delays == d))
        if at_risk > 0:
            survival *= 1.0 - events / at_risk
        at_risk -= events
        out.append(survival)
    return np.array(out)


def geometric_table(hazards, n=1_000_000):
    """Hazard table whose hazards follow the given sequence as closely as integer counts allow."""
    remaining, n_equal = n, []
    for h in hazards:
        k = int(round(remaining * h))
        n_equal.append(k)
        remaining -= k
    n_equal.append(remaining)
    return HazardTable.from_counts(n_equal)


class TestHazardTable:
    def test_counts(self):
        table = HazardTable.from_delays([0, 0, 1, 3, 3, 3])
        assert table.delay.tolist() == [0, 1, 2, 3]
        assert table.n_equal.tolist() == [2, 1, 0, 3]
        assert table.n_geq.tolist() == [6, 4, 3, 3]
        assert table.n_events == 6

    def test_from_triangle(self):
        events = EventDataset.from_days([1, 1, 2, 3], [1, 3, 4, 3])
        table = hazard_table(triangle_from_events(events, 4))
        assert table.n_equal.tolist() == [2, 0, 2]

    def test_frame(self):
        frame = HazardTable.from_delays([0, 1, 1]).to_frame()
        assert list(frame.columns) == ["delay", "n_equal", "n_geq", "hazard"]

    @pytest.mark.parametrize("delays", [[], [-1, 2]])
    def test_invalid(self, delays):
        with pytest.raises(ValueError):
            HazardTable.from_delays(delays)


class TestKaplanMeier:
    def test_matches_product_limit(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            delays = rng.negative_binomial(2, 0.3, size=int(rng.integers(5, 500)))
            np.testing.assert_allclose(kaplan_meier(delays), product_limit(delays), atol=1e-14)

    def test_non_increasing_to_zero(self):
        survival = kaplan_meier(np.random.default_rng(1).poisson(6, size=300))
        assert np.all(np.diff(survival) <= 0)
        assert survival[-1] == 0.0

    def test_hazard_exposures_reproduce_kaplan_meier(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            occurrence = rng.integers(1, 40, size=300)
            delays = rng.geometric(0.2, size=300) - 1
            events = EventDataset.from_days(occurrence, occurrence + delays)
            # every delay observed: evaluate well after the last observation
            triangle = triangle_from_events(events, events.last_day)
            assert km_equivalence_check(triangle) <= 1e-10

    def test_hand_example(self):
        triangle = triangle_from_events(EventDataset.from_days([1, 1, 1, 1], [1, 1, 2, 3]), 3)
        assert km_equivalence_check(triangle) < 1e-15

    def test_wrong_exposures_deviate(self):
        triangle = triangle_from_events(EventDataset.from_days([1, 1, 1, 1], [1, 1, 2, 3]), 3)
        assert km_equivalence_check(triangle, np.full(3, 0.1)) > 0.1

    def test_delay_model_survival(self):
        np.testing.assert_allclose(delay_model_survival([np.log(2.0)] * 3), [0.5, 0.25, 0.125])


class TestDelayBins:
    def test_labels_and_lookup(self):
        bins = DelayBins((0, 1, 2, 7))
        assert bins.labels() == ["0", "1", "2-6", "7+"]
        assert bins.bin_of([0, 1, 3, 6, 7, 400]).tolist() == [0, 1, 2, 2, 3, 3]
        assert bins.as_effect().starts == (0, 1, 2, 7)

    def test_json_round_trip(self):
        bins = DelayBins((0, 3, 9))
        assert DelayBins.from_json(bins.to_json()) == bins

    @pytest.mark.parametrize("starts", [(), (1, 2), (0, 3, 3)])
    def test_invalid(self, starts):
        with pytest.raises(ValueError):
            DelayBins(starts)


class TestProposeBins:
    def test_constant_hazard(self):
        opts = BinningOptions()
        table = geometric_table([0.1] * 80)
        starts = propose_bins(table, opts).starts
        assert starts[:8] == tuple(range(8))
        # fewer than 1% of the events remain from delay 44 on
        assert starts[-1] == 44
        for lo, hi in zip(starts[8:], starts[9:]):
            assert hi - lo <= opts.max_width(lo)

    def test_spike_gets_its_own_bin(self):
        hazards = [0.1] * 80
        hazards[14] = 0.6
        starts = propose_bins(geometric_table(hazards)).starts
        assert 14 in starts and 15 in starts

    def test_changing_hazard_is_split(self):
        hazards = [0.05] * 30 + [0.01] * 400
        starts = propose_bins(geometric_table(hazards), BinningOptions(growth=10.0)).starts
        assert 30 in starts

    def test_deterministic(self):
        table = geometric_table(list(np.linspace(0.3, 0.05, 60)))
        assert propose_bins(table) == propose_bins(table)

    def test_ramp_is_grouped_left_to_right(self):
        # log hazard exposure rising by 0.055 per day: bins close once a delay strays
        # more than 0.15 from the running mean, or at the maximum width
        delay = np.arange(41)
        exposure = 0.01 * np.exp(0.055 * delay)
        n_geq = np.full(41, 1e6)
        table = HazardTable(delay, n_geq * -np.expm1(-exposure), n_geq)
        starts = propose_bins(table, BinningOptions(tail_fraction=0.0)).starts
        assert starts == tuple(range(8)) + (8, 12, 17, 22, 27, 32, 37, 40)

    def test_lower_threshold_only_splits(self):
        hazards = [0.05] * 20 + [0.05 * np.exp(0.2)] * 12 + [0.05 * np.exp(0.45)] * 12
        hazards += [0.05 * np.exp(0.95)] * 16
        table = geometric_table(hazards)
        wide = dict(growth=10.0, tail_fraction=0.0)
        coarse = set(propose_bins(table, BinningOptions(threshold=0.3, **wide)).starts)
        fine = set(propose_bins(table, BinningOptions(threshold=0.05, **wide)).starts)
        assert coarse <= fine
        assert 20 in fine and 20 not in coarse

    def test_single_delay(self):
        assert propose_bins(HazardTable.from_delays([0, 0, 0])).starts == (0,)

    def test_short_table(self):
        # all delays below min_singleton: one bin each
        assert propose_bins(HazardTable.from_delays([0, 1, 1, 2, 3])).starts == (0, 1, 2, 3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"threshold": 0.0},
            {"growth": 1.0},
            {"spike_factor": 0.5},
            {"min_singleton": 0},
            {"tail_fraction": 1.0},
        ],
    )
    def test_invalid_options(self, kwargs):
        with pytest.raises(ValueError):
            BinningOptions(**kwargs)
