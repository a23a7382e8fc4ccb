"""Heuristics miner: dependency graph, split/join binding, Petri net conversion."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

from ..errors import EmptyLog
from ..petri import TAU, NetBuilder, PetriNet
from .dfg import as_traces, dfg_from_traces

START, END = "▶", "■"


def dependency(ab: int, ba: int) -> float:
    """(|a>b| - |b>a|) / (|a>b| + |b>a| + 1)."""
    return (ab - ba) / (ab + ba + 1)


def self_dependency(aa: int) -> float:
    return aa / (aa + 1)


def two_loop_dependency(aba: int, bab: int) -> float:
    return (aba + bab) / (aba + bab + 1)


@dataclass
class CausalNet:
    activities: list[str]
    inputs: dict[str, list[list[str]]] = field(default_factory=dict)   # XOR groups, ANDed
    outputs: dict[str, list[list[str]]] = field(default_factory=dict)
    dependency: dict[tuple[str, str], float] = field(default_factory=dict)

    @property
    def edges(self) -> set[tuple[str, str]]:
        return {(a, b) for a, groups in self.outputs.items() for g in groups for b in g}


def _xor_groups(items, concurrent):
    # items bound by non-concurrency share a place (XOR); distinct places are ANDed
    parent = {x: x for x in items}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for x, y in combinations(items, 2):
        if not concurrent(x, y):
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)
    groups: dict[str, list[str]] = {}
    for x in items:
        groups.setdefault(find(x), []).append(x)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def mine_causal_net(log, dependency_threshold: float = 0.75, and_threshold: float = 0.65) -> CausalNet:
    traces = [t for t in as_traces(log) if t]
    if not traces:
        raise EmptyLog("log has no events")
    dfg = dfg_from_traces(traces)
    acts = sorted(dfg.activities)
    df = dfg.edge_freq
    # a b a patterns for length-two loops
    l2 = Counter()
    for t in traces:
        for x, y, z in zip(t, t[1:], t[2:]):
            if x == z and x != y:
                l2[(x, y)] += 1

    dep: dict[tuple[str, str], float] = {}
    for a in acts:
        for b in acts:
            if a == b:
                if df[(a, a)]:
                    dep[(a, a)] = self_dependency(df[(a, a)])
            elif df[(a, b)]:
                d = dependency(df[(a, b)], df[(b, a)])
                if l2[(a, b)] + l2[(b, a)] and df[(a, a)] == 0 and df[(b, b)] == 0:
                    d = max(d, two_loop_dependency(l2[(a, b)], l2[(b, a)]))
                dep[(a, b)] = d

    succ = {a: set() for a in acts}
    pred = {a: set() for a in acts}
    for (a, b), d in dep.items():
        if d >= dependency_threshold:
            succ[a].add(b)
            pred[b].add(a)
    starts, ends = set(dfg.start_freq), set(dfg.end_freq)
    # all-activities-connected: keep the strongest link when thresholding isolates an activity
    for a in acts:
        if not (pred[a] - {a}) and a not in starts:
            cands = [(d, x) for (x, y), d in dep.items() if y == a and x != a]
            if cands:
                x = min(cands, key=lambda c: (-c[0], c[1]))[1]
                succ[x].add(a)
                pred[a].add(x)
        if not (succ[a] - {a}) and a not in ends:
            cands = [(d, y) for (x, y), d in dep.items() if x == a and y != a]
            if cands:
                y = min(cands, key=lambda c: (-c[0], c[1]))[1]
                succ[a].add(y)
                pred[y].add(a)
    for a in starts:
        succ[START] = succ.get(START, set()) | {a}
        pred[a].add(START)
    for a in ends:
        succ[a].add(END)
        pred[END] = pred.get(END, set()) | {a}

    def df_count(x, y):
        if x == START:
            return dfg.start_freq[y]
        if y == END:
            return dfg.end_freq[x]
        return df[(x, y)] if y != START and x != END else 0

    def out_concurrent(a):
        def f(b, c):
            if l2[(b, c)] or l2[(c, b)] or {b, c} & {START, END}:
                return False  # length-two loops and the artificial ends are choices
            den = df_count(a, b) + df_count(a, c) + 1
            return (df_count(b, c) + df_count(c, b)) / den >= and_threshold
        return f

    def in_concurrent(a):
        def f(b, c):
            if l2[(b, c)] or l2[(c, b)] or {b, c} & {START, END}:
                return False
            den = df_count(b, a) + df_count(c, a) + 1
            return (df_count(b, c) + df_count(c, b)) / den >= and_threshold
        return f

    nodes = [START] + acts + [END]
    cn = CausalNet(nodes, dependency=dep)
    for a in nodes:
        outs = sorted(succ.get(a, ()))
        ins = sorted(pred.get(a, ()))
        cn.outputs[a] = _xor_groups(outs, out_concurrent(a)) if outs else []
        cn.inputs[a] = _xor_groups(ins, in_concurrent(a)) if ins else []
    return cn


def causal_net_to_petri(cn: CausalNet, name: str = "") -> PetriNet:
    """Every XOR group becomes a place; a causal edge a→b routes a token from
    a's output place to b's input place, directly when both places are
    dedicated to that single edge and through a silent transition otherwise."""
    b = NetBuilder(name)
    source, sink = b.place("source"), b.place("sink")
    tid = {}
    for a in cn.activities:
        tid[a] = b.transition(None if a in (START, END) else a, "t_" + ("start" if a == START else "end" if a == END else a))
    b.arc(source, tid[START])
    b.arc(tid[END], sink)

    out_place: dict[tuple[str, str], tuple[str, int]] = {}
    in_place: dict[tuple[str, str], tuple[str, int]] = {}
    for a in cn.activities:
        for g in cn.outputs.get(a, []):
            p = b.place(f"o[{a}|{','.join(g)}]")
            b.arc(tid[a], p)
            for x in g:
                out_place[(a, x)] = (p, len(g))
        for g in cn.inputs.get(a, []):
            p = b.place(f"i[{','.join(g)}|{a}]")
            b.arc(p, tid[a])
            for x in g:
                in_place[(x, a)] = (p, len(g))

    merged: dict[str, str] = {}
    for edge in sorted(set(out_place) & set(in_place)):
        (po, no), (pi, ni) = out_place[edge], in_place[edge]
        if no == 1 and ni == 1:
            merged[pi] = po
        else:
            t = b.transition(TAU, f"tau[{edge[0]}->{edge[1]}]")
            b.arc(po, t)
            b.arc(t, pi)
    if merged:
        b.places = [p for p in b.places if p not in merged]
        b.arcs = {(merged.get(x, x), merged.get(y, y)) for x, y in b.arcs}
    # prune places left dangling by a one-sided causal edge
    used = {x for arc in b.arcs for x in arc}
    b.places = [p for p in b.places if p in used]
    return b.build({source: 1}, {sink: 1})


def heuristics_miner(log, dependency_threshold: float = 0.75, and_threshold: float = 0.65, name: str = "") -> PetriNet:
    cn = mine_causal_net(log, dependency_threshold, and_threshold)
    return causal_net_to_petri(cn, name)
