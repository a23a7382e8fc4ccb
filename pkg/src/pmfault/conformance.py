"""Alignment-based fitness and simulation-comparison metrics.

Alignments use unit costs: a synchronous move or a silent model move is
free, a log-only move or a visible model-only move costs 1.
"""
from __future__ import annotations

import heapq
import json
import time
import weakref
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, SearchBudgetExceeded, UnsoundModel, ZeroVarianceObserved
from .petri import TAU, PetriNet, SoundnessResult, Verdict, check_soundness

SKIP = ">>"
LOG_MOVE_COST = 1
MODEL_MOVE_COST = 1
DEFAULT_NODE_BUDGET = 1_000_000
DEFAULT_TIME_LIMIT_S = 300.0

_soundness_cache: "weakref.WeakKeyDictionary[PetriNet, SoundnessResult]" = weakref.WeakKeyDictionary()
_shortest_cache: "weakref.WeakKeyDictionary[PetriNet, int]" = weakref.WeakKeyDictionary()


def soundness_of(net: PetriNet, marking_budget: int = 100_000) -> SoundnessResult:
    """Cached :func:`check_soundness`."""
    res = _soundness_cache.get(net)
    if res is None:
        res = check_soundness(net, marking_budget)
        _soundness_cache[net] = res
    return res


def _require_usable(net: PetriNet, check: bool):
    if not check:
        return
    res = soundness_of(net)
    if res.verdict is Verdict.UNSOUND:
        raise UnsoundModel(f"cannot align against an unsound net: {res}")


@dataclass(frozen=True)
class Alignment:
    moves: tuple[tuple[str, str], ...]  # (log label or SKIP, transition id or SKIP)
    cost: int
    optimal: bool = True
    expanded: int = 0

    def log_projection(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.moves if l != SKIP)

    def model_projection(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.moves if t != SKIP)

    def to_json(self) -> str:
        return json.dumps({"cost": self.cost, "optimal": self.optimal,
                           "moves": [list(m) for m in self.moves]})


def align(trace: Sequence[str], net: PetriNet, *, check_sound: bool = True,
          node_budget: int = DEFAULT_NODE_BUDGET, time_limit_s: float | None = DEFAULT_TIME_LIMIT_S) -> Alignment:
    """Optimal alignment of ``trace`` with ``net`` by A* over the synchronous product.

    The heuristic counts remaining trace events whose label no transition
    carries; each of them needs a log move, so it never overestimates.
    """
    _require_usable(net, check_sound)
    trace = tuple(trace)
    n = len(trace)
    labels = net.label_list
    alphabet = net.visible_labels()
    by_label: dict[str, list[int]] = {}
    for i, l in enumerate(labels):
        if l is not TAU:
            by_label.setdefault(l, []).append(i)
    h_suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        h_suffix[i] = h_suffix[i + 1] + (trace[i] not in alphabet)

    preset, postset = net.preset, net.postset
    mf = net.mf
    start = (net.m0, 0)
    g_best = {start: 0}
    parent: dict[tuple, tuple | None] = {start: None}
    closed = set()
    counter = 0
    heap = [(h_suffix[0], 0, counter, start)]
    expanded = 0
    t0 = time.perf_counter()

    def fire(v, ti):
        out = list(v)
        for p in preset[ti]:
            out[p] -= 1
        for p in postset[ti]:
            out[p] += 1
        return tuple(out)

    while heap:
        f, g, _, state = heapq.heappop(heap)
        if state in closed:
            continue
        v, i = state
        if i == n and v == mf:
            return Alignment(_backtrack(parent, state), g, True, expanded)
        closed.add(state)
        expanded += 1
        if expanded > node_budget:
            raise SearchBudgetExceeded(f"expanded more than {node_budget} search nodes")
        if time_limit_s is not None and expanded % 512 == 0 and time.perf_counter() - t0 > time_limit_s:
            raise SearchBudgetExceeded(f"alignment exceeded {time_limit_s} s")

        en = [ti for ti, pre in enumerate(preset) if all(v[p] > 0 for p in pre)]
        succs = []
        if i < n:
            for ti in by_label.get(trace[i], ()):
                if ti in en:
                    succs.append(((fire(v, ti), i + 1), 0, (trace[i], net.transitions[ti])))
        for ti in en:
            cost = 0 if labels[ti] is TAU else MODEL_MOVE_COST
            succs.append(((fire(v, ti), i), cost, (SKIP, net.transitions[ti])))
        if i < n:
            succs.append(((v, i + 1), LOG_MOVE_COST, (trace[i], SKIP)))
        for nxt, cost, move in succs:
            if nxt in closed:
                continue
            ng = g + cost
            if ng < g_best.get(nxt, 1 << 60):
                g_best[nxt] = ng
                parent[nxt] = (state, move)
                counter += 1
                heapq.heappush(heap, (ng + h_suffix[nxt[1]], ng, counter, nxt))
    raise UnsoundModel("final marking unreachable from the initial marking")


def _backtrack(parent, state):
    moves = []
    while parent[state] is not None:
        state, move = parent[state]
        moves.append(move)
    return tuple(reversed(moves))


def shortest_visible_length(net: PetriNet, marking_budget: int = 1_000_000) -> int:
    """Fewest visible firings in any complete firing sequence (0-1 BFS)."""
    cached = _shortest_cache.get(net)
    if cached is not None:
        return cached
    labels = net.label_list
    dist = {net.m0: 0}
    dq = deque([(0, net.m0)])
    done = set()
    while dq:
        d, v = dq.popleft()
        if v in done:
            continue
        done.add(v)
        if v == net.mf:
            _shortest_cache[net] = d
            return d
        if len(done) > marking_budget:
            raise SearchBudgetExceeded("reachability budget exhausted")
        for ti in net.enabled_vec(v):
            w = net.fire_vec(v, ti)
            c = 0 if labels[ti] is TAU else 1
            if d + c < dist.get(w, 1 << 60):
                dist[w] = d + c
                if c:
                    dq.append((d + 1, w))
                else:
                    dq.appendleft((d, w))
    raise UnsoundModel("final marking unreachable from the initial marking")


def worst_alignment_cost(trace: Sequence[str], net: PetriNet, *, check_sound: bool = True) -> int:
    """Cost of aligning every event as a log move plus the cheapest model run."""
    _require_usable(net, check_sound)
    return len(trace) * LOG_MOVE_COST + shortest_visible_length(net) * MODEL_MOVE_COST


def fitness(trace: Sequence[str], net: PetriNet, *, alignment: Alignment | None = None, **kw) -> float:
    """1 - optimal cost / worst cost."""
    check = kw.pop("check_sound", True)
    worst = worst_alignment_cost(trace, net, check_sound=check)
    if alignment is None:
        alignment = align(trace, net, check_sound=check, **kw)
    if worst == 0:
        return 1.0
    return 1.0 - alignment.cost / worst


# --------------------------------------------------------------------------
# simulation comparison

def _as_2d(x):
    a = np.asarray(getattr(x, "values", x), dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def resample_hold(simulated, n: int) -> np.ndarray:
    """Nearest-index resampling of ``simulated`` to ``n`` rows.

    Row ``i`` takes the sample nearest to ``i * (m - 1) / (n - 1)``; exact
    halves go to the later sample. Integer arithmetic keeps ties exact.
    """
    s = _as_2d(simulated)
    m = s.shape[0]
    if m == n:
        return s
    if n == 1:
        return s[:1]
    i = np.arange(n)
    idx = (2 * i * (m - 1) + (n - 1)) // (2 * (n - 1))
    return s[idx]


def _prepare(observed, simulated):
    o, s = _as_2d(observed), _as_2d(simulated)
    if o.shape[0] == 0 or s.shape[0] == 0:
        raise ValueError("windows must be non-empty")
    if o.shape[1] != s.shape[1]:
        raise DimensionMismatch(f"{o.shape[1]} observed features vs {s.shape[1]} simulated")
    return o, resample_hold(s, o.shape[0])


def rmse(observed, simulated) -> float:
    """Per-feature root mean squared error, averaged over features."""
    o, s = _prepare(observed, simulated)
    return float(np.sqrt(((o - s) ** 2).mean(axis=0)).mean())


def r2(observed, simulated) -> float:
    """Per-feature coefficient of determination of ``simulated`` against ``observed``, averaged.

    Features with zero observed variance are skipped.
    """
    o, s = _prepare(observed, simulated)
    ss_tot = ((o - o.mean(axis=0)) ** 2).sum(axis=0)
    keep = ss_tot > 0
    if not keep.any():
        raise ZeroVarianceObserved("every observed feature is constant")
    ss_res = ((o - s) ** 2).sum(axis=0)
    return float((1.0 - ss_res[keep] / ss_tot[keep]).mean())


def best_over_pool(observed, pool) -> tuple[float, float]:
    """(min RMSE, max R²) of ``observed`` against every simulated window in ``pool``."""
    o = _as_2d(observed)
    if not pool:
        return float("inf"), float("-inf")
    best_rmse = min(rmse(o, s) for s in pool)
    try:
        best_r2 = max(r2(o, s) for s in pool)
    except ZeroVarianceObserved:
        best_r2 = float("-inf")
    return best_rmse, best_r2
