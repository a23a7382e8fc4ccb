"""Discretization of windows into states, state transitions and event logs."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import TimeSeriesWindow
from .errors import (
    AllWindowsDegenerate,
    DimensionMismatch,
    NoTransitions,
    TooFewPoints,
    WindowTooShort,
)


def activity_label(src: int, dst: int) -> str:
    return f"s{src}->s{dst}"


def parse_label(label: str) -> tuple[int, int]:
    """Inverse of :func:`activity_label`."""
    try:
        a, b = label.split("->")
        if not (a.startswith("s") and b.startswith("s")):
            raise ValueError
        return int(a[1:]), int(b[1:])
    except ValueError:
        raise ValueError(f"not a state-transition label: {label!r}") from None


# --------------------------------------------------------------------------
# k-means

@dataclass(frozen=True, eq=False)
class Centroids:
    points: np.ndarray  # (k, p)
    seed: int | None
    inertia: float
    history: tuple[float, ...] = ()  # inertia after each Lloyd iteration

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_dict(self):
        return {"k": self.k, "points": self.points.tolist(), "seed": self.seed, "inertia": self.inertia}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["points"], dtype=float), d.get("seed"), float(d["inertia"]))


def _sq_dists(x, c):
    # explicit differences keep exact ties exact (no |x|^2 - 2xc + |c|^2 cancellation)
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise TooFewPoints(f"fewer than {k} distinct points")
        i = rng.choice(n, p=d2 / total)
        centers.append(x[i])
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans_fit(values, k: int, seed=None, max_iter: int = 300, tol: float = 1e-6) -> Centroids:
    """Lloyd's algorithm with k-means++ seeding.

    Stops after ``max_iter`` iterations or once the relative inertia change
    drops below ``tol``. Empty clusters are re-seeded at the point farthest
    from its centroid. Centroids are returned in lexicographic order so
    state ids do not depend on the seeding order.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if k < 1:
        raise ValueError("k must be positive")
    if x.shape[0] < k:
        raise TooFewPoints(f"{x.shape[0]} points for k={k}")
    if np.unique(x, axis=0).shape[0] < k:
        raise TooFewPoints(f"fewer than {k} distinct points")
    rng = np.random.default_rng(seed)
    c = _kmeanspp(x, k, rng)

    history = []
    prev = None
    prev_lab = None
    for _ in range(max_iter):
        d2 = _sq_dists(x, c)
        lab = d2.argmin(axis=1)
        if prev_lab is not None and np.array_equal(lab, prev_lab):
            break  # fixed point
        prev_lab = lab
        best = d2[np.arange(len(x)), lab]
        new = c.copy()
        for j in range(k):
            members = x[lab == j]
            if len(members):
                new[j] = members.mean(axis=0)
        counts = np.bincount(lab, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(best.argmax())
            new[j] = x[far]
            best[far] = 0.0
        c = new
        inertia = float(_sq_dists(x, c).min(axis=1).sum())
        history.append(inertia)
        if prev is not None and abs(prev - inertia) <= tol * max(prev, 1e-300):
            break
        if inertia == 0.0:
            break
        prev = inertia

    c = c[np.lexsort(c.T[::-1])]
    inertia = float(_sq_dists(x, c).min(axis=1).sum())
    return Centroids(c, None if seed is None else int(seed), inertia, tuple(history))


def assign_states(window, c: Centroids) -> np.ndarray:
    """Nearest-centroid state of every sample; ties go to the lowest state id."""
    x = window.values if isinstance(window, TimeSeriesWindow) else np.asarray(window, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != c.dim:
        raise DimensionMismatch(f"window has {x.shape[1]} features, centroids have {c.dim}")
    return _sq_dists(x, c.points).argmin(axis=1)


# --------------------------------------------------------------------------
# cases and logs

@dataclass(frozen=True)
class Event:
    src: int
    dst: int
    timestep: int
    state_time_s: float

    @property
    def label(self) -> str:
        return activity_label(self.src, self.dst)


@dataclass(frozen=True)
class Case:
    case_id: str
    events: tuple[Event, ...]

    @property
    def trace(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.events)

    @property
    def states(self) -> tuple[int, ...]:
        """Visited states in order, including the final one."""
        if not self.events:
            return ()
        return tuple(e.src for e in self.events) + (self.events[-1].dst,)

    def __len__(self):
        return len(self.events)


def case_from_states(states: Sequence[int], rate_hz: float, start: int = 0, case_id: str = "0") -> Case:
    """Build a case from a per-sample state sequence whose first sample is at ``start``."""
    states = np.asarray(states)
    if len(states) < 2:
        raise WindowTooShort("need at least two samples")
    change = np.flatnonzero(states[1:] != states[:-1]) + 1
    if change.size == 0:
        raise NoTransitions(f"case {case_id}: single state {int(states[0])} throughout")
    events = []
    prev = 0
    for l in change:
        events.append(Event(int(states[l - 1]), int(states[l]), int(start + l), (l - prev) / rate_hz))
        prev = l
    return Case(case_id, tuple(events))


def extract_case(window: TimeSeriesWindow, c: Centroids, rate_hz: float, case_id: str | None = None) -> Case:
    if len(window) < 2:
        raise WindowTooShort("need at least two samples")
    cid = case_id if case_id is not None else f"{window.parent_id}:{window.start}-{window.end}"
    return case_from_states(assign_states(window, c), rate_hz, window.start, cid)


@dataclass(frozen=True)
class EventLog:
    cases: tuple[Case, ...]
    k: int
    fault_label: str = ""
    skipped: tuple[str, ...] = field(default_factory=tuple)  # ids of degenerate windows

    def __len__(self):
        return len(self.cases)

    @property
    def traces(self) -> list[tuple[str, ...]]:
        return [c.trace for c in self.cases]

    @property
    def n_events(self) -> int:
        return sum(len(c) for c in self.cases)

    def alphabet(self) -> list[str]:
        return sorted({a for t in self.traces for a in t})

    def to_json(self) -> str:
        return json.dumps({
            "fault_label": self.fault_label,
            "k": self.k,
            "skipped": list(self.skipped),
            "cases": [
                {"case_id": c.case_id,
                 "events": [{"src": e.src, "dst": e.dst, "timestep": e.timestep,
                             "state_time_s": e.state_time_s} for e in c.events]}
                for c in self.cases
            ],
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EventLog":
        d = json.loads(text)
        cases = tuple(
            Case(c["case_id"], tuple(Event(int(e["src"]), int(e["dst"]), int(e["timestep"]),
                                           float(e["state_time_s"])) for e in c["events"]))
            for c in d["cases"]
        )
        return cls(cases, int(d["k"]), d.get("fault_label", ""), tuple(d.get("skipped", ())))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case_id", "activity", "src", "dst", "timestep", "state_time_s"])
        for c in self.cases:
            for e in c.events:
                w.writerow([c.case_id, e.label, e.src, e.dst, e.timestep, repr(e.state_time_s)])
        return buf.getvalue()


def build_log(windows: Iterable[TimeSeriesWindow], c: Centroids, rate_hz: float, fault_label: str = "") -> EventLog:
    """One case per window; windows that never change state are skipped and recorded."""
    windows = list(windows)
    if not windows:
        raise ValueError("no windows")
    cases, skipped = [], []
    for i, w in enumerate(windows):
        cid = f"{i}:{w.parent_id}:{w.start}-{w.end}"
        try:
            cases.append(extract_case(w, c, rate_hz, cid))
        except (NoTransitions, WindowTooShort):
            skipped.append(cid)
    if not cases:
        raise AllWindowsDegenerate(f"all {len(windows)} windows map to a single state")
    return EventLog(tuple(cases), c.k, fault_label, tuple(skipped))


def stack_values(windows: Iterable[TimeSeriesWindow]) -> np.ndarray:
    return np.vstack([w.values for w in windows])
