"""State-time histograms, stochastic Petri nets and their simulation."""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    Deadlock,
    EmptyLog,
    EmptyTimes,
    MissingDistribution,
    TooManyFailures,
    TraceOverflow,
    ZeroLengthWindow,
)
from .eventlog import Centroids, EventLog, parse_label
from .petri import TAU, PetriNet

log = logging.getLogger(__name__)

RACE = "race"
PRESELECTION = "preselection"
POLICIES = (RACE, PRESELECTION)


@dataclass(frozen=True, eq=False)
class DurationHistogram:
    bin_edges: np.ndarray
    probs: np.ndarray
    support_count: int = 0

    def __post_init__(self):
        edges = np.array(self.bin_edges, dtype=float)
        probs = np.array(self.probs, dtype=float)
        if edges.ndim != 1 or probs.ndim != 1 or len(edges) != len(probs) + 1 or len(probs) == 0:
            raise ValueError("need n + 1 edges for n > 0 probabilities")
        if not self._is_zero(edges) and np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")
        edges.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "probs", probs)

    @staticmethod
    def _is_zero(edges):
        return len(edges) == 2 and edges[0] == 0.0 and edges[1] == 0.0

    @property
    def is_zero(self) -> bool:
        return self._is_zero(self.bin_edges)

    @property
    def n_bins(self) -> int:
        return len(self.probs)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.bin_edges[0]), float(self.bin_edges[-1])

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Pick a bin by probability, then a uniform point inside it."""
        if self.is_zero:
            return 0.0 if size is None else np.zeros(size)
        n = 1 if size is None else size
        b = rng.choice(self.n_bins, size=n, p=self.probs)
        lo, hi = self.bin_edges[b], self.bin_edges[b + 1]
        out = lo + rng.random(n) * (hi - lo)
        return float(out[0]) if size is None else out


ZERO = DurationHistogram(np.array([0.0, 0.0]), np.array([1.0]), 0)


def build_histogram(times: Sequence[float], bins: int = 10) -> DurationHistogram:
    """Equal-width histogram over ``[min, max]``; a single distinct value gets one narrow bin."""
    t = np.asarray(times, dtype=float)
    if t.size == 0:
        raise EmptyTimes("no durations")
    if bins < 1:
        raise ValueError("bins must be positive")
    lo, hi = float(t.min()), float(t.max())
    if lo == hi:
        eps = max(1e-9, abs(lo) * 1e-9)
        return DurationHistogram(np.array([lo, lo + eps]), np.array([1.0]), int(t.size))
    counts, edges = np.histogram(t, bins=bins, range=(lo, hi))
    return DurationHistogram(edges, counts / counts.sum(), int(t.size))


def collect_state_times(log_: EventLog) -> dict[int, list[float]]:
    """Durations of the source state of every event, grouped by state."""
    if len(log_) == 0:
        raise EmptyLog("log has no cases")
    out: dict[int, list[float]] = {}
    for case in log_.cases:
        for e in case.events:
            out.setdefault(e.src, []).append(e.state_time_s)
    return dict(sorted(out.items()))


def state_histograms(state_times: Mapping[int, Sequence[float]], bins: int = 10) -> dict[int, DurationHistogram]:
    return {s: build_histogram(t, bins) for s, t in sorted(state_times.items())}


@dataclass(frozen=True, eq=False)
class StochasticPetriNet:
    net: PetriNet
    dist: Mapping[str, DurationHistogram]

    def __post_init__(self):
        missing = [t for t in self.net.visible_transitions if t not in self.dist]
        if missing:
            raise ValueError(f"no distribution for visible transitions {missing}")
        for t in self.net.silent_transitions:
            if t in self.dist and not self.dist[t].is_zero:
                raise ValueError(f"silent transition {t!r} must have zero duration")


def enhance(net: PetriNet, state_times: Mapping[int, DurationHistogram | Sequence[float]],
            activity_to_source_state: Callable[[str], int] | Mapping[str, int] | None = None,
            bins: int = 10) -> StochasticPetriNet:
    """Attach to each visible transition the duration histogram of its source state.

    ``state_times`` may hold raw durations or ready-made histograms.
    """
    if activity_to_source_state is None:
        source_of = lambda a: parse_label(a)[0]
    elif isinstance(activity_to_source_state, Mapping):
        source_of = activity_to_source_state.__getitem__
    else:
        source_of = activity_to_source_state
    hists = {}
    for s, v in state_times.items():
        hists[s] = v if isinstance(v, DurationHistogram) else build_histogram(v, bins)
    dist = {}
    for t in net.transitions:
        lab = net.labels[t]
        if lab is TAU:
            dist[t] = ZERO
            continue
        s = source_of(lab)
        if s not in hists:
            raise MissingDistribution(s)
        dist[t] = hists[s]
    return StochasticPetriNet(net, dist)


# --------------------------------------------------------------------------
# simulation

@dataclass(frozen=True)
class SimulatedTrace:
    labels: tuple[str, ...]
    durations: tuple[float, ...]
    firings: tuple[str, ...]  # every fired transition id, silent ones included

    def __len__(self):
        return len(self.labels)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_trace(spn: StochasticPetriNet, seed=None, max_events: int = 200, policy: str = RACE) -> SimulatedTrace:
    """Play the token game from the initial to the final marking.

    ``race``: an enabled silent transition fires at once (uniform choice
    among them) unless it shares an input place with a visible transition.
    Such a deferred silent transition would otherwise always pre-empt the
    visible one it competes with, so a fair coin decides between firing one
    of them and running the race. In the race every enabled visible
    transition draws a duration and the shortest one fires.
    ``preselection``: one enabled transition is chosen uniformly and, if
    visible, draws its duration.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    rng = _rng(seed)
    net = spn.net
    dist = [spn.dist.get(t, ZERO) for t in net.transitions]
    labels = net.label_list
    v, mf = net.m0, net.mf
    visible_inputs = {p for i, pre in enumerate(net.preset) if labels[i] is not TAU for p in pre}
    deferred = [labels[i] is TAU and bool(visible_inputs.intersection(pre)) for i, pre in enumerate(net.preset)]
    out_l, out_d, firings = [], [], []
    silent_budget = 20 * max_events + 100
    while v != mf:
        en = net.enabled_vec(v)
        if not en:
            raise Deadlock(net.from_vector(v))
        d = None
        if policy == RACE:
            taus = [i for i in en if labels[i] is TAU and not deferred[i]]
            waiting = [i for i in en if deferred[i]]
            vis = [i for i in en if labels[i] is not TAU]
            if taus:
                i = taus[int(rng.integers(len(taus)))]
            elif waiting and (not vis or rng.random() < 0.5):
                i = waiting[int(rng.integers(len(waiting)))]
            else:
                en = vis
                draws = [dist[i].sample(rng) for i in en]
                k = int(np.argmin(draws))
                i, d = en[k], draws[k]
        else:
            i = en[int(rng.integers(len(en)))]
            if labels[i] is not TAU:
                d = dist[i].sample(rng)
        v = net.fire_vec(v, i)
        firings.append(net.transitions[i])
        if labels[i] is TAU:
            silent_budget -= 1
            if silent_budget < 0:
                raise TraceOverflow("too many silent firings")
        else:
            out_l.append(labels[i])
            out_d.append(float(d))
            if len(out_l) > max_events:
                raise TraceOverflow(f"more than {max_events} visible events")
    return SimulatedTrace(tuple(out_l), tuple(out_d), tuple(firings))


@dataclass(frozen=True, eq=False)
class SimulatedWindow:
    pairs: tuple[tuple[int, float], ...]  # (state, duration_s)
    values: np.ndarray
    rate_hz: float
    counts: tuple[int, ...] = field(default=())

    def __len__(self):
        return self.values.shape[0]

    @property
    def state_sequence(self) -> np.ndarray:
        """Per-sample state ids."""
        return np.repeat([s for s, _ in self.pairs], self.counts).astype(int)


def _n_samples(duration, rate_hz):
    return int(math.floor(duration * rate_hz + 0.5))


def trace_to_window(trace: Sequence[str] | SimulatedTrace, durations: Sequence[float] | None,
                    centroids: Centroids, rate_hz: float,
                    source_state: Callable[[str], int] | None = None) -> SimulatedWindow:
    """Hold each transition's source-state centroid for round(duration * rate) samples."""
    if isinstance(trace, SimulatedTrace):
        labels, durations = trace.labels, trace.durations if durations is None else durations
    else:
        labels = tuple(trace)
    if durations is None or len(durations) != len(labels):
        raise ValueError("one duration per trace element required")
    source_state = source_state or (lambda a: parse_label(a)[0])
    states = [source_state(a) for a in labels]
    if any(not 0 <= s < centroids.k for s in states):
        raise ValueError(f"state ids must lie in [0, {centroids.k})")
    counts = [_n_samples(d, rate_hz) for d in durations]
    if sum(counts) == 0:
        raise ZeroLengthWindow("all durations round to zero samples")
    values = np.repeat(centroids.points[states], counts, axis=0) if states else np.empty((0, centroids.dim))
    values.setflags(write=False)
    return SimulatedWindow(tuple((s, float(d)) for s, d in zip(states, durations)), values, rate_hz, tuple(counts))


def simulate_pool(spn: StochasticPetriNet, n: int, seed, centroids: Centroids, rate_hz: float,
                  max_events: int = 200, policy: str = RACE, min_success: float = 0.5,
                  failures: Counter | None = None) -> list[SimulatedWindow]:
    """Run ``n`` independent simulations with seeds spawned from ``seed``.

    Failed runs (overflow, deadlock, empty window) are skipped and tallied in
    ``failures`` when given; fewer than ``min_success * n`` successes raise
    :class:`TooManyFailures`.
    """
    if n < 1:
        raise ValueError("n must be positive")
    tally = Counter() if failures is None else failures
    out = []
    for child in np.random.SeedSequence(seed).spawn(n):
        rng = np.random.default_rng(child)
        try:
            tr = simulate_trace(spn, rng, max_events, policy)
            out.append(trace_to_window(tr, None, centroids, rate_hz))
        except (TraceOverflow, Deadlock, ZeroLengthWindow) as exc:
            tally[type(exc).__name__] += 1
    if tally:
        log.info("simulation failures: %s", dict(tally))
    if len(out) < min_success * n:
        raise TooManyFailures(f"{len(out)} of {n} simulations succeeded ({dict(tally)})")
    return out


# --------------------------------------------------------------------------
# CSV exchange

def histograms_to_csv(hists: Mapping[int, DurationHistogram]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "bin_lo", "bin_hi", "prob"])
    for s, h in sorted(hists.items()):
        for lo, hi, p in zip(h.bin_edges[:-1], h.bin_edges[1:], h.probs):
            w.writerow([s, repr(float(lo)), repr(float(hi)), repr(float(p))])
    return buf.getvalue()


def histograms_from_csv(text: str, support_counts: Mapping[int, int] | None = None) -> dict[int, DurationHistogram]:
    rows: dict[int, list[tuple[float, float, float]]] = {}
    for r in csv.DictReader(io.StringIO(text)):
        rows.setdefault(int(r["state"]), []).append((float(r["bin_lo"]), float(r["bin_hi"]), float(r["prob"])))
    out = {}
    for s, bins in sorted(rows.items()):
        edges = [bins[0][0]] + [b[1] for b in bins]
        probs = np.array([b[2] for b in bins])
        out[s] = DurationHistogram(np.array(edges), probs / probs.sum(),
                                   int((support_counts or {}).get(s, 0)))
    return out


def window_to_csv(values: np.ndarray, feature_names: Sequence[str], start: int = 0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestep", *feature_names])
    for i, row in enumerate(values):
        w.writerow([start + i, *(repr(float(x)) for x in row)])
    return buf.getvalue()
