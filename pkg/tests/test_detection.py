import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmfault.data import NORMAL, MultivariateTimeSeries
from pmfault.detection import (
    LabeledWindowPool,
    composed_accuracy,
    compose_training_set,
    detection_accuracy,
    threshold_detect,
)
from pmfault.errors import InsufficientPool, WindowTooLong


def pool(n_pos, n_neg):
    ts = MultivariateTimeSeries(np.zeros((2 * (n_pos + n_neg) + 2, 1)), 1.0, ("a",))
    pos = tuple(ts.window(2 * i, 2 * i + 1, "fault") for i in range(n_pos))
    neg = tuple(ts.window(2 * (n_pos + i), 2 * (n_pos + i) + 1, NORMAL) for i in range(n_neg))
    return LabeledWindowPool(pos, neg)


class TestThresholdDetect:
    def test_constant_series(self):
        ts = MultivariateTimeSeries(np.full((200, 2), 3.0), 10.0, ("a", "b"))
        assert threshold_detect(ts, 10, 0.5) == []

    def test_single_burst_is_contained(self):
        rng = np.random.default_rng(0)
        v = rng.normal(0, 1, size=(1000, 3))
        v[500:520] += 10.0
        ts = MultivariateTimeSeries(v, 10.0, ("x", "y", "z"))
        found = threshold_detect(ts, 20, 25.0, "burst")
        assert len(found) == 1
        w = found[0]
        assert w.start <= 500 and w.end >= 519 and w.label == "burst"

    def test_window_too_long(self):
        ts = MultivariateTimeSeries(np.zeros((5, 1)), 1.0, ("a",))
        with pytest.raises(WindowTooLong):
            threshold_detect(ts, 6, 1.0)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 30), st.floats(0.5, 20.0))
    def test_windows_disjoint_and_in_bounds(self, seed, wl, thr):
        rng = np.random.default_rng(seed)
        v = rng.standard_t(2, size=(300, 2))
        ts = MultivariateTimeSeries(v, 10.0, ("a", "b"))
        ws = threshold_detect(ts, wl, thr)
        for w in ws:
            assert 0 <= w.start < w.end < len(ts)
        for a, b in zip(ws, ws[1:]):
            assert a.end < b.start


class TestCompose:
    def test_full_accuracy(self):
        out = compose_training_set(pool(60, 10), 1.0, 48, 0)
        assert len(out) == 48 and all(w.is_anomalous for w in out)

    def test_three_quarters(self):
        out = compose_training_set(pool(60, 20), 0.75, 48, 0)
        assert sum(w.is_anomalous for w in out) == 36
        assert sum(not w.is_anomalous for w in out) == 12

    def test_insufficient_negatives(self):
        with pytest.raises(InsufficientPool):
            compose_training_set(pool(10, 4), 0.5, 10, 0)

    def test_insufficient_positives(self):
        with pytest.raises(InsufficientPool):
            compose_training_set(pool(5, 40), 1.0, 10, 0)

    @pytest.mark.parametrize("acc", [0.0, -0.1, 1.01])
    def test_acc_out_of_range(self, acc):
        with pytest.raises(ValueError):
            compose_training_set(pool(10, 10), acc, 5, 0)

    def test_deterministic_per_seed(self):
        p = pool(30, 30)
        a = compose_training_set(p, 0.6, 20, 5)
        b = compose_training_set(p, 0.6, 20, 5)
        assert [w.start for w in a] == [w.start for w in b]

    @given(st.floats(0.01, 1.0), st.integers(1, 40), st.integers(0, 1000))
    def test_realized_accuracy_within_rounding(self, acc, n, seed):
        out = compose_training_set(pool(40, 40), acc, n, seed)
        assert len(out) == n
        assert len({id(w) for w in out}) == n  # drawn without replacement
        assert abs(composed_accuracy(out) - acc) <= 1 / n + 1e-12


class TestPool:
    def test_rejects_mislabeled(self):
        p = pool(2, 2)
        with pytest.raises(ValueError):
            LabeledWindowPool(p.negatives, ())
        with pytest.raises(ValueError):
            LabeledWindowPool(p.positives, p.positives)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_accuracy_formula(tp, tn, fp, fn):
    total = tp + tn + fp + fn
    if total == 0:
        with pytest.raises(ValueError):
            detection_accuracy(tp, tn, fp, fn)
    else:
        correct = sum([1] * tp + [1] * tn)
        assert math.isclose(detection_accuracy(tp, tn, fp, fn), correct / total, abs_tol=1e-12)
