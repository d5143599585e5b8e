import numpy as np
import pytest

from hidden_events.counts import CountTriangle, EventDataset, actual_hidden_count, triangle_from_events
from hidden_events.errors import DataError, EmptyTriangleError


@pytest.fixture
def events():
    # day:         1  1  1  2  2  3  4
    # observed on: 1  2  6  2  5  3  4
    return EventDataset.from_days([1, 1, 1, 2, 2, 3, 4], [1, 2, 6, 2, 5, 3, 4])


class TestEventDataset:
    def test_canonical_order(self):
        events = EventDataset.from_days([3, 1, 1], [5, 4, 1])
        assert events.occurrence.tolist() == [1, 1, 3]
        assert events.observation.tolist() == [1, 4, 5]

    def test_reversed_records_dropped(self):
        with pytest.warns(RuntimeWarning, match="1 record"):
            events = EventDataset.from_days([5, 2], [4, 3], warn=True)
        assert len(events) == 1
        assert events.dropped == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            EventDataset.from_days([1, 2], [3])

    def test_from_dates(self):
        events = EventDataset.from_dates(["1996-01-01", "1996-01-03"], ["1996-01-02", "1996-01-03"])
        assert events.occurrence.tolist() == [1, 3]
        assert events.delays.tolist() == [1, 0]

    def test_concat_requires_same_origin(self, events):
        other = EventDataset.from_days([1], [1], origin="2000-01-01")
        with pytest.raises(DataError):
            events.concat(other)
        assert len(events.concat(events)) == 2 * len(events)


class TestTriangle:
    def test_cells(self, events):
        tri = triangle_from_events(events, 3)
        assert tri.cells == {(1, 1): 1, (1, 2): 1, (2, 2): 1, (3, 3): 1}
        assert tri.total == 4

    def test_row_totals_cover_every_day(self, events):
        tri = triangle_from_events(events, 4)
        assert tri.days.tolist() == [1, 2, 3, 4]
        assert tri.row_totals.tolist() == [2, 1, 1, 1]

    def test_counts_are_not_future(self, events):
        tri = triangle_from_events(events, 4)
        assert np.all(tri.occurrence + tri.delay <= 4)

    def test_truncate_matches_rebuild(self, events):
        late = triangle_from_events(events, 6)
        assert late.truncate(3).cells == triangle_from_events(events, 3).cells

    def test_truncate_forward_rejected(self, events):
        with pytest.raises(ValueError):
            triangle_from_events(events, 3).truncate(4)

    def test_gap_counts(self, events):
        tri = triangle_from_events(events, 6)
        # occurred by day 2, observed on days 3 to 6
        assert tri.gap_counts(2) == 2

    def test_empty(self):
        events = EventDataset.from_days([5], [9])
        with pytest.raises(EmptyTriangleError):
            triangle_from_events(events, 6)

    def test_eval_before_data(self, events):
        with pytest.raises(ValueError):
            triangle_from_events(events, 0)

    def test_frame_round_trip(self, events):
        tri = triangle_from_events(events, 6)
        again = CountTriangle.from_frame(tri.to_frame(), "1996-01-06")
        assert again.cells == tri.cells

    def test_to_events(self, events):
        tri = triangle_from_events(events, 6)
        back = tri.to_events()
        np.testing.assert_array_equal(back.occurrence, events.occurrence)
        np.testing.assert_array_equal(back.observation, events.observation)


class TestActualHidden:
    def test_counts(self, events):
        assert actual_hidden_count(events, 2) == 2
        assert actual_hidden_count(events, 2, 5) == 1

    def test_horizon_before_eval(self, events):
        with pytest.raises(ValueError):
            actual_hidden_count(events, 3, 3)

    def test_gap_plus_later(self, events):
        tri = triangle_from_events(events, 5)
        later = actual_hidden_count(events, 2) - tri.gap_counts(2)
        assert later == 1
