import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmfault.data import MultivariateTimeSeries
from pmfault.errors import AllWindowsDegenerate, DimensionMismatch, NoTransitions, TooFewPoints, WindowTooShort
from pmfault.eventlog import (
    Centroids,
    EventLog,
    activity_label,
    assign_states,
    build_log,
    case_from_states,
    extract_case,
    kmeans_fit,
    parse_label,
    stack_values,
)


def window_of(values, start=0):
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    pad = np.zeros((start, v.shape[1]))
    ts = MultivariateTimeSeries(np.vstack([pad, v]), 10.0, tuple(f"f{i}" for i in range(v.shape[1])))
    return ts.window(start, start + len(v) - 1, "fault")


class TestLabels:
    def test_round_trip(self):
        assert activity_label(3, 12) == "s3->s12"
        assert parse_label("s3->s12") == (3, 12)

    @pytest.mark.parametrize("bad", ["s1-s2", "x1->s2", "s1->s1x", ""])
    def test_malformed(self, bad):
        with pytest.raises(ValueError):
            parse_label(bad)


class TestKMeans:
    def test_separable(self):
        c = kmeans_fit([0.0, 0.0, 10.0, 10.0], 2, seed=0)
        assert c.points[:, 0].tolist() == [0.0, 10.0]
        assert c.inertia == 0.0

    def test_k_equals_n(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 2))
        assert kmeans_fit(x, 6, seed=1).inertia == pytest.approx(0.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            kmeans_fit([1.0, 2.0], 3, seed=0)
        with pytest.raises(TooFewPoints):
            kmeans_fit([1.0, 1.0, 1.0, 2.0], 3, seed=0)

    def test_three_states_give_six_transitions(self):
        c = kmeans_fit([[0.0], [0.1], [5.0], [5.1], [9.0], [9.2]], 3, seed=0)
        pairs = {activity_label(a, b) for a in range(c.k) for b in range(c.k) if a != b}
        assert len(pairs) == 6

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.integers(2, 6))
    def test_deterministic_fixed_point_and_inertia(self, seed, k):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(60, 3))
        c1, c2 = kmeans_fit(x, k, seed), kmeans_fit(x, k, seed)
        assert np.array_equal(c1.points, c2.points)
        # inertia recount by brute force
        d = [min(((p - q) ** 2).sum() for q in c1.points) for p in x]
        assert c1.inertia == pytest.approx(sum(d), rel=1e-9)
        # non-increasing inertia over iterations
        h = c1.history
        assert all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))
        # one more Lloyd step leaves the assignment unchanged
        lab = assign_states(x, c1)
        means = np.array([x[lab == j].mean(axis=0) for j in range(k)])
        moved = Centroids(means, None, 0.0)
        assert np.array_equal(assign_states(x, moved), lab)
        assert len({tuple(p) for p in c1.points}) == k

    def test_serialization(self):
        c = kmeans_fit([[0.0], [1.0], [5.0]], 2, seed=4)
        back = Centroids.from_dict(json.loads(json.dumps(c.to_dict())))
        assert np.array_equal(back.points, c.points) and back.inertia == c.inertia


class TestAssign:
    C = Centroids(np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]), 0, 0.0)

    def test_exact_match(self):
        assert assign_states(np.array([[5.0, 5.0]]), self.C).tolist() == [2]

    def test_tie_goes_to_lowest(self):
        assert assign_states(np.array([[1.0, 0.0]]), self.C).tolist() == [0]

    def test_shape_and_dimension(self):
        w = window_of(np.zeros((7, 2)))
        assert len(assign_states(w, self.C)) == 7
        with pytest.raises(DimensionMismatch):
            assign_states(window_of(np.zeros((4, 3))), self.C)


class TestCases:
    def test_hand_traced(self):
        case = case_from_states([1, 1, 1, 2, 2, 3], 10.0)
        got = [(e.src, e.dst, e.timestep, e.state_time_s) for e in case.events]
        assert got == [(1, 2, 3, 0.3), (2, 3, 5, 0.2)]

    def test_minimal(self):
        (e,) = case_from_states([1, 2], 10.0).events
        assert (e.label, e.timestep, e.state_time_s) == ("s1->s2", 1, 0.1)

    def test_constant_and_short(self):
        with pytest.raises(NoTransitions):
            case_from_states([4, 4, 4], 10.0)
        with pytest.raises(WindowTooShort):
            case_from_states([4], 10.0)

    def test_timesteps_offset_by_window_start(self):
        c = Centroids(np.array([[0.0], [1.0]]), 0, 0.0)
        case = extract_case(window_of([0, 0, 1, 1, 0], start=7), c, 10.0)
        assert [e.timestep for e in case.events] == [9, 11]

    @given(st.lists(st.integers(0, 4), min_size=2, max_size=60), st.sampled_from([1.0, 10.0, 25.0]))
    def test_chain_and_duration_properties(self, states, rate):
        if len(set(states)) == 1:
            return
        case = case_from_states(states, rate)
        ev = case.events
        assert all(e.src != e.dst for e in ev)
        assert all(a.dst == b.src for a, b in zip(ev, ev[1:]))
        assert all(a.timestep < b.timestep for a, b in zip(ev, ev[1:]))
        assert sum(e.state_time_s for e in ev) <= len(states) / rate + 1e-12
        assert case.states[0] == states[0]


class TestBuildLog:
    def test_skips_degenerate_and_counts(self):
        c = Centroids(np.array([[0.0], [1.0]]), 0, 0.0)
        ws = [window_of([0, 1, 0]), window_of([0, 0, 0]), window_of([1, 0])]
        log = build_log(ws, c, 10.0, "f")
        assert len(log) == 2 and len(log.skipped) == 1
        assert log.traces == [("s0->s1", "s1->s0"), ("s1->s0",)]

    def test_all_degenerate(self):
        c = Centroids(np.array([[0.0], [1.0]]), 0, 0.0)
        with pytest.raises(AllWindowsDegenerate):
            build_log([window_of([0, 0])], c, 10.0)

    def test_json_round_trip(self):
        c = Centroids(np.array([[0.0], [1.0], [2.0]]), 0, 0.0)
        log = build_log([window_of([0, 1, 2, 2, 0]), window_of([2, 1])], c, 10.0, "f")
        back = EventLog.from_json(log.to_json())
        assert back.traces == log.traces and back.k == 3 and back.fault_label == "f"
        rows = log.to_csv().splitlines()
        assert rows[0] == "case_id,activity,src,dst,timestep,state_time_s" and len(rows) == 1 + log.n_events

    def test_synthetic_fixture_against_recount(self, bench):
        train, _, _, rate = bench
        ws = train["velocity"]
        c = kmeans_fit(stack_values(ws), 5, seed=0)
        log = build_log(ws, c, rate, "velocity")
        assert len(log) <= len(ws)
        # scripted recount straight from the per-sample states
        n_changes = 0
        for w in ws:
            s = assign_states(w, c).tolist()
            n_changes += sum(1 for a, b in zip(s, s[1:]) if a != b)
        assert log.n_events == n_changes
        assert build_log(ws, c, rate, "velocity").traces == log.traces
        # every state is visited on the data the centroids were fitted to
        used = Counter(int(x) for w in ws for x in assign_states(w, c))
        assert set(used) == set(range(5))
