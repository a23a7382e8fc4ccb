import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    NOISY_TRACE,
    alignment_instance,
    brute_force_alignment_cost,
    running_example_net,
    r2_direct,
    rmse_direct,
)
from pmfault.conformance import (
    SKIP,
    align,
    best_over_pool,
    fitness,
    r2,
    resample_hold,
    rmse,
    shortest_visible_length,
    worst_alignment_cost,
)
from pmfault.discovery import act, loop, par, seq, tau, tree_to_petri, xor
from pmfault.errors import DimensionMismatch, SearchBudgetExceeded, UnsoundModel, ZeroVarianceObserved
from pmfault.petri import TAU, NetBuilder, replay


def all_tau_net():
    b = NetBuilder()
    i, o = b.place("i"), b.place("o")
    t = b.transition(TAU, "t")
    b.arc(i, t)
    b.arc(t, o)
    return b.build({i: 1}, {o: 1})


class TestRunningExample:
    def test_costs_and_fitness(self):
        net = running_example_net()
        a = align(NOISY_TRACE, net)
        assert a.cost == 4 and a.optimal
        assert worst_alignment_cost(NOISY_TRACE, net) == 15
        assert fitness(NOISY_TRACE, net) == pytest.approx(1 - 4 / 15)

    def test_shortest_visible_run(self):
        assert shortest_visible_length(running_example_net()) == 6

    def test_alignment_projections(self):
        net = running_example_net()
        a = align(NOISY_TRACE, net)
        assert a.log_projection() == NOISY_TRACE
        assert replay(net, a.model_projection()) == net.final_marking
        # the cost is the number of moves that are not free
        paid = sum(1 for l, t in a.moves if l == SKIP and net.labels[t] is not TAU or t == SKIP)
        assert paid == a.cost

    def test_json_dump(self):
        d = json.loads(align(NOISY_TRACE, running_example_net()).to_json())
        assert d["cost"] == 4 and all(len(m) == 2 for m in d["moves"])


class TestAlign:
    def test_firing_sequence_costs_nothing(self):
        net = running_example_net()
        for tr in [("tr1", "tr2", "tr3", "tr4", "tr5", "tr6"), ("tr1", "tr4", "tr5", "tr2", "tr2", "tr3", "tr4", "tr5", "tr6")]:
            assert align(tr, net).cost == 0
            assert fitness(tr, net) == 1.0

    def test_foreign_labels_give_zero_fitness(self):
        net = tree_to_petri(seq(act("a"), act("b")))
        trace = ("x", "y", "z")
        assert align(trace, net).cost == 5
        assert fitness(trace, net) == 0.0

    def test_worst_cost_examples(self):
        assert worst_alignment_cost(("a", "b", "c"), all_tau_net()) == 3
        assert worst_alignment_cost(("a", "b"), tree_to_petri(seq(act("a"), act("b")))) == 4

    def test_empty_trace_on_silent_model(self):
        assert fitness((), all_tau_net()) == 1.0

    def test_unsound_rejected(self):
        b = NetBuilder()
        i, m, o = b.place("i"), b.place("m"), b.place("o")
        t1, t2 = b.transition("a", "t1"), b.transition("b", "t2")
        b.arc(i, t1)
        b.arc(t1, m)
        b.arc(t1, o)
        b.arc(m, t2)
        b.arc(t2, o)
        net = b.build({i: 1}, {o: 1})
        with pytest.raises(UnsoundModel):
            align(("a",), net)
        with pytest.raises(UnsoundModel):
            worst_alignment_cost(("a",), net)

    def test_budget(self):
        net = tree_to_petri(par(*(loop(act(c), tau()) for c in "abcd")))
        with pytest.raises(SearchBudgetExceeded):
            align(tuple("dcbaxyzdcba"), net, node_budget=50)

    def test_deterministic(self):
        net = running_example_net()
        assert align(NOISY_TRACE, net).moves == align(NOISY_TRACE, net).moves

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**31))
    def test_matches_brute_force(self, seed):
        trace, net = alignment_instance(np.random.default_rng(seed))
        assert align(trace, net).cost == brute_force_alignment_cost(trace, net)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31))
    def test_fitness_bounds(self, seed):
        trace, net = alignment_instance(np.random.default_rng(seed))
        a = align(trace, net)
        f = fitness(trace, net, alignment=a)
        assert 0.0 <= f <= 1.0
        assert (f == 1.0) == (a.cost == 0)
        assert a.log_projection() == trace
        assert replay(net, a.model_projection()) == net.final_marking

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31))
    def test_renaming_invariance(self, seed):
        trace, net = alignment_instance(np.random.default_rng(seed))
        rng = np.random.default_rng(seed + 1)
        ids = list(net.places) + list(net.transitions)
        perm = rng.permutation(len(ids))
        renamed = net.relabeled({x: f"n{perm[i]}" for i, x in enumerate(ids)})
        assert align(trace, renamed).cost == align(trace, net).cost

    def test_optional_and_choice(self):
        net = tree_to_petri(seq(act("a"), xor(act("b"), tau()), act("c")))
        assert align(("a", "c"), net).cost == 0
        assert align(("a", "b", "b", "c"), net).cost == 1


class TestMetrics:
    def test_rmse_examples(self):
        x = np.random.default_rng(0).normal(size=(12, 3))
        assert rmse(x, x) == 0.0
        assert rmse(np.zeros((7, 2)), np.ones((4, 2))) == pytest.approx(1.0)

    def test_r2_examples(self):
        x = np.random.default_rng(1).normal(size=(15, 2))
        assert r2(x, x) == pytest.approx(1.0)
        assert r2(x, np.tile(x.mean(axis=0), (15, 1))) == pytest.approx(0.0, abs=1e-12)
        wrong = np.full_like(x, 10.0)
        assert r2(x, wrong) < 0
        assert r2(x, wrong) == pytest.approx(r2_direct(x, wrong), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31))
    def test_match_direct_formulas(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(1, 4))
        obs = rng.normal(size=(int(rng.integers(2, 40)), p))
        sim = rng.normal(size=(int(rng.integers(1, 40)), p))
        assert abs(rmse(obs, sim) - rmse_direct(obs, sim)) <= 1e-12
        assert abs(r2(obs, sim) - r2_direct(obs, sim)) <= 1e-9

    def test_rmse_symmetric_at_equal_length(self):
        rng = np.random.default_rng(4)
        a, b = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
        assert rmse(a, b) == pytest.approx(rmse(b, a))

    def test_r2_not_symmetric(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=(20, 2)), 3 * rng.normal(size=(20, 2))
        assert r2(a, b) != pytest.approx(r2(b, a))

    def test_zero_variance_feature_skipped(self):
        obs = np.column_stack([np.arange(5.0), np.ones(5)])
        sim = np.column_stack([np.arange(5.0), np.zeros(5)])
        assert r2(obs, sim) == pytest.approx(1.0)
        with pytest.raises(ZeroVarianceObserved):
            r2(np.ones((5, 2)), sim)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rmse(np.zeros((3, 2)), np.zeros((3, 3)))

    def test_resample_hold(self):
        s = np.arange(4.0)[:, None]
        assert resample_hold(s, 7).ravel().tolist() == [0, 1, 1, 2, 2, 3, 3]  # halves go up
        assert resample_hold(s, 1).ravel().tolist() == [0]

    def test_best_over_pool(self):
        obs = np.arange(6.0)[:, None]
        pool = [obs + 1, obs, -obs]
        assert best_over_pool(obs, pool) == (0.0, 1.0)
        lo, hi = best_over_pool(obs, [])
        assert math.isinf(lo) and math.isinf(hi)
