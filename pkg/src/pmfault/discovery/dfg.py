from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import EmptyLog
from ..eventlog import EventLog


def as_traces(log) -> list[tuple[str, ...]]:
    """Accept an :class:`EventLog` or any iterable of label sequences."""
    if isinstance(log, EventLog):
        return log.traces
    return [tuple(t) for t in log]


@dataclass
class DirectlyFollowsGraph:
    activities: set[str] = field(default_factory=set)
    edge_freq: Counter = field(default_factory=Counter)
    start_freq: Counter = field(default_factory=Counter)
    end_freq: Counter = field(default_factory=Counter)
    act_freq: Counter = field(default_factory=Counter)

    def successors(self, a) -> set[str]:
        return {y for (x, y) in self.edge_freq if x == a}

    def filtered(self, threshold: float) -> "DirectlyFollowsGraph":
        """Drop infrequent edges and start/end activities.

        An edge ``(a, b)`` survives if its count is at least ``threshold``
        times the most frequent outgoing edge of ``a``; start and end
        activities are filtered against the most frequent start/end.
        """
        if threshold <= 0:
            return self
        max_out = Counter()
        for (a, _), n in self.edge_freq.items():
            max_out[a] = max(max_out[a], n)
        edges = Counter({e: n for e, n in self.edge_freq.items() if n >= threshold * max_out[e[0]]})
        starts = _filter_counter(self.start_freq, threshold)
        ends = _filter_counter(self.end_freq, threshold)
        return DirectlyFollowsGraph(set(self.activities), edges, starts, ends, Counter(self.act_freq))


def _filter_counter(c: Counter, threshold: float) -> Counter:
    if not c:
        return Counter()
    top = max(c.values())
    return Counter({a: n for a, n in c.items() if n >= threshold * top})


def dfg_from_traces(traces: Iterable[Sequence[str]], counts: Iterable[int] | None = None) -> DirectlyFollowsGraph:
    g = DirectlyFollowsGraph()
    traces = list(traces)
    counts = [1] * len(traces) if counts is None else list(counts)
    for t, n in zip(traces, counts):
        if not t:
            continue
        g.activities.update(t)
        g.start_freq[t[0]] += n
        g.end_freq[t[-1]] += n
        for a in t:
            g.act_freq[a] += n
        for a, b in zip(t, t[1:]):
            g.edge_freq[(a, b)] += n
    return g


def build_dfg(log) -> DirectlyFollowsGraph:
    traces = as_traces(log)
    if not traces or not any(traces):
        raise EmptyLog("log has no events")
    return dfg_from_traces(traces)
