import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treelab.core import (LabeledDataset, LabelOracle, Point, RandomnessTape,
                          RunTrace, StrandTracker, UnlabeledDataset,
                          consistent_indices, draw_minibatch, encode_path,
                          parse_path, path_constraint, point_reaches,
                          read_dataset, read_trace, write_dataset, write_trace)
from treelab.targets import Dictator


def paths(max_d=8):
    """Random leaf paths: distinct coordinates with signs."""

    @st.composite
    def build(draw):
        d = draw(st.integers(1, max_d))
        k = draw(st.integers(0, d))
        coords = draw(st.permutations(range(d)))[:k]
        signs = draw(st.lists(st.sampled_from([-1, 1]), min_size=k, max_size=k))
        return tuple(zip(coords, signs))

    return build()


class TestPoint:
    def test_signs_roundtrip(self):
        p = Point.from_signs([1, -1, -1, 1])
        assert p.signs == (1, -1, -1, 1)
        assert p.mask == 0b1001

    def test_rejects_non_sign_entries(self):
        with pytest.raises(ValueError):
            Point.from_signs([1, 0, -1])

    def test_mask_range_checked(self):
        with pytest.raises(ValueError):
            Point(d=2, mask=4)


class TestLeafPaths:
    def test_root_encoding(self):
        assert encode_path(()) == "."
        assert parse_path(".") == ()

    def test_encoding_is_one_based(self):
        assert encode_path(((2, 1), (4, -1))) == "3+5-"

    @given(paths())
    def test_encode_parse_roundtrip(self, path):
        assert parse_path(encode_path(path)) == path

    def test_constraint_matches_membership(self):
        path = ((0, 1), (3, -1))
        m, v = path_constraint(path)
        assert m == 0b1001 and v == 0b0001
        assert point_reaches(0b0001, path)
        assert not point_reaches(0b1001, path)


class TestTape:
    def test_same_key_same_stream(self):
        a = RandomnessTape(7).uniform_masks(10, 50, "x", "k")
        b = RandomnessTape(7).uniform_masks(10, 50, "x", "k")
        assert np.array_equal(a, b)

    def test_distinct_keys_distinct_streams(self):
        tape = RandomnessTape(7)
        a = tape.uniform_masks(10, 50, "x", "k1")
        b = tape.uniform_masks(10, 50, "x", "k2")
        c = tape.uniform_masks(10, 50, "y", "k1")
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_draw_order_irrelevant(self):
        tape = RandomnessTape(3)
        first = tape.uniform_masks(8, 10, "a")
        tape.uniform_masks(8, 1000, "b")  # interleaved traffic on another key
        again = tape.uniform_masks(8, 10, "a")
        assert np.array_equal(first, again)

    def test_masks_in_range(self):
        masks = RandomnessTape(0).uniform_masks(5, 1000, "r")
        assert masks.max() < 32


def _dataset(seed=0, d=6, n=100):
    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 1 << d, size=n, dtype=np.uint64)
    labels = rng.integers(0, 2, size=n).astype(np.uint8)
    return LabeledDataset(d, masks, labels)


class TestMinibatch:
    def test_whole_dataset_when_b_exceeds_n(self, tape):
        ds = _dataset(n=20)
        batch = draw_minibatch(ds, (), 50, tape)
        assert np.array_equal(batch.indices, np.arange(20))

    def test_empty_when_nothing_consistent(self, tape):
        ds = LabeledDataset(3, np.array([0b000, 0b010], dtype=np.uint64),
                            np.array([0, 1], dtype=np.uint8))
        batch = draw_minibatch(ds, ((0, 1),), 4, tape)
        assert batch.size == 0

    def test_repeated_draws_identical(self, tape):
        ds = _dataset(n=500)
        a = draw_minibatch(ds, ((1, -1),), 16, tape)
        b = draw_minibatch(ds, ((1, -1),), 16, tape)
        assert np.array_equal(a.indices, b.indices)

    def test_rejects_nonpositive_b(self, tape):
        with pytest.raises(ValueError):
            draw_minibatch(_dataset(), (), 0, tape)

    @given(st.integers(0, 2 ** 31), st.integers(1, 40))
    @settings(max_examples=50, deadline=None)
    def test_without_replacement_and_consistent(self, seed, b):
        ds = _dataset(seed=seed % 1000, n=200)
        path = ((2, 1), (5, -1))
        batch = draw_minibatch(ds, path, b, RandomnessTape(seed))
        assert len(set(batch.indices.tolist())) == batch.size
        assert batch.size <= b
        for m in batch.masks:
            assert point_reaches(int(m), path)
        assert np.array_equal(ds.labels[batch.indices], batch.labels)

    def test_inclusion_frequency_uniform(self):
        # Monte-Carlo: each consistent index should appear with frequency
        # b/m, within 5 standard deviations over 1000 independent draws.
        ds = _dataset(seed=42, d=6, n=60)
        path = ((0, 1),)
        pool = consistent_indices(ds.masks, path)
        m, b, trials = len(pool), 5, 1000
        counts = {int(i): 0 for i in pool}
        for trial in range(trials):
            batch = draw_minibatch(ds, path, b, RandomnessTape(trial), domain=f"mc{trial}")
            assert batch.size == b
            for i in batch.indices:
                counts[int(i)] += 1
        p = b / m
        sd = (trials * p * (1 - p)) ** 0.5
        for i, c in counts.items():
            assert abs(c - trials * p) <= 5 * sd, (i, c)


class TestDatasetIO:
    def test_labeled_roundtrip(self):
        ds = _dataset(n=17)
        buf = io.StringIO()
        write_dataset(ds, buf)
        buf.seek(0)
        back = read_dataset(buf)
        assert isinstance(back, LabeledDataset)
        assert np.array_equal(back.masks, ds.masks)
        assert np.array_equal(back.labels, ds.labels)

    def test_unlabeled_roundtrip(self):
        ds = _dataset(n=9).unlabeled()
        buf = io.StringIO()
        write_dataset(ds, buf)
        buf.seek(0)
        back = read_dataset(buf)
        assert isinstance(back, UnlabeledDataset)
        assert not isinstance(back, LabeledDataset)
        assert np.array_equal(back.masks, ds.masks)

    def test_header_format(self):
        ds = _dataset(n=3, d=4)
        buf = io.StringIO()
        write_dataset(ds, buf)
        assert buf.getvalue().splitlines()[0] == "4 3"

    def test_rejects_bad_entries(self):
        with pytest.raises(ValueError):
            read_dataset(io.StringIO("2 1\n1 2 0\n"))
        with pytest.raises(ValueError):
            read_dataset(io.StringIO("2 1\n1 -1 7\n"))
        with pytest.raises(ValueError):
            read_dataset(io.StringIO("oops\n"))


class TestLabelOracle:
    def test_count_equals_distinct_revealed(self):
        ds = _dataset(d=6, n=50).unlabeled()
        oracle = LabelOracle(Dictator(6, 0), ds)
        oracle.labels_for(np.array([0, 1, 2, 2]))
        assert oracle.query_count == 3
        oracle.labels_for(np.array([1, 2, 3]))
        assert oracle.query_count == 4
        assert oracle.batches_drawn == 2

    def test_labels_match_target(self):
        ds = _dataset(d=6, n=50).unlabeled()
        target = Dictator(6, 2)
        oracle = LabelOracle(target, ds)
        got = oracle.labels_for(np.arange(50))
        assert np.array_equal(got, target.eval_masks(ds.masks))

    def test_phase_breakdown(self):
        ds = _dataset(d=6, n=50).unlabeled()
        oracle = LabelOracle(Dictator(6, 0), ds)
        oracle.set_phase("a")
        oracle.labels_for(np.array([0, 1]))
        oracle.set_phase("b")
        oracle.labels_for(np.array([1, 2]))
        assert oracle.phase_counts == {"a": 2, "b": 1}


class TestRunTrace:
    def _trace(self):
        tr = RunTrace(depth_cap=4)
        tr.append((), 3, 0.5, 2.0)
        tr.append(((3, -1),), 1, 0.25, 3.0)
        return tr

    def test_roundtrip(self):
        tr = self._trace()
        buf = io.StringIO()
        write_trace(tr, buf)
        buf.seek(0)
        back = read_trace(buf)
        assert [(e.j, e.path, e.coord, e.gain, e.size_estimate) for e in back] \
            == [(e.j, e.path, e.coord, e.gain, e.size_estimate) for e in tr]

    def test_validate_catches_depth_cap(self):
        tr = RunTrace(depth_cap=0)
        tr.append(((1, 1),), 2, 0.1, 2.0)
        with pytest.raises(ValueError):
            tr.validate()


class TestStrandTracker:
    def test_advance_and_estimate(self):
        tracker = StrandTracker(np.array([0b00, 0b01, 0b11], dtype=np.uint64))
        assert tracker.size_estimate() == 1.0
        tracker.advance((), 0)
        # depths now all 1 -> mean 2^1 = 2
        assert tracker.size_estimate() == 2.0
        assert tracker.distinct_paths() == {((0, -1),), ((0, 1),)}
        tracker.advance(((0, 1),), 1)
        # two points at depth 2, one at depth 1 -> (4 + 4 + 2) / 3
        assert tracker.size_estimate() == pytest.approx(10 / 3)
