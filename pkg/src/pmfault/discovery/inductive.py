"""Inductive miner with infrequent-behaviour filtering (IMf).

Cuts are detected on the directly-follows graph in the order exclusive,
sequence, parallel, loop; the log is then split along the cut and the
miner recurses on each part. When no cut exists on the full graph, the
graph is filtered and cut detection is retried; failing that, a flower
model over the remaining activities is returned. With a zero threshold
nothing is filtered and every training trace fits the result.
"""
from __future__ import annotations

from collections import Counter
from itertools import combinations

from ..errors import EmptyLog
from .dfg import DirectlyFollowsGraph, as_traces, dfg_from_traces
from .tree import LOOP, PAR, SEQ, XOR, ProcessTree, act, loop, tau, xor

__all__ = ["inductive_miner", "find_cut", "split_log"]


def inductive_miner(log, noise_threshold: float = 0.0) -> ProcessTree:
    if not 0.0 <= noise_threshold <= 1.0:
        raise ValueError("noise_threshold must lie in [0, 1]")
    traces = as_traces(log)
    if not traces:
        raise EmptyLog("log has no cases")
    return _mine(Counter(traces), noise_threshold)


def _mine(log: Counter, thr: float) -> ProcessTree:
    total = sum(log.values())
    empties = log.get((), 0)
    if empties == total:
        return tau()
    if empties:
        body = Counter({t: n for t, n in log.items() if t})
        if empties >= thr * total:
            return xor(tau(), _mine(body, thr))
        log = body  # infrequent empty traces are noise

    alphabet = sorted({a for t in log for a in t})
    if len(alphabet) == 1:
        a = alphabet[0]
        if all(len(t) == 1 for t in log):
            return act(a)
        return loop(act(a), tau())

    traces, counts = zip(*sorted(log.items()))
    dfg = dfg_from_traces(traces, counts)
    cut = find_cut(dfg, alphabet)
    if cut is None and thr > 0:
        cut = find_cut(dfg.filtered(thr), alphabet)
    if cut is None:
        return loop(xor(*[act(a) for a in alphabet]), tau())
    op, parts = cut
    children = [_mine(sub, thr) for sub in split_log(log, op, parts)]
    return ProcessTree(op, tuple(children))


# --------------------------------------------------------------------------
# cut detection

def _components(nodes, edges) -> list[list[str]]:
    parent = {a: a for a in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, list[str]] = {}
    for a in nodes:
        groups.setdefault(find(a), []).append(a)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def _reachability(dfg: DirectlyFollowsGraph, alphabet) -> dict[str, set[str]]:
    succ = {a: set() for a in alphabet}
    for a, b in dfg.edge_freq:
        if a in succ and b in succ:
            succ[a].add(b)
    reach = {}
    for a in alphabet:
        seen, stack = set(), list(succ[a])
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(succ[x])
        reach[a] = seen
    return reach


def _xor_cut(dfg, alphabet):
    comps = _components(alphabet, [e for e in dfg.edge_freq if e[0] in alphabet and e[1] in alphabet])
    return comps if len(comps) > 1 else None


def _seq_cut(dfg, alphabet):
    reach = _reachability(dfg, alphabet)
    same = [(a, b) for a, b in combinations(alphabet, 2)
            if (b in reach[a]) == (a in reach[b])]
    groups = _components(alphabet, same)
    if len(groups) < 2:
        return None
    gidx = {a: i for i, g in enumerate(groups) for a in g}
    later = [set() for _ in groups]
    for a in alphabet:
        for b in reach[a]:
            if gidx[b] != gidx[a]:
                later[gidx[a]].add(gidx[b])
    order = sorted(range(len(groups)), key=lambda i: (-len(later[i]), groups[i][0]))
    groups = [groups[i] for i in order]
    for i, j in combinations(range(len(groups)), 2):
        for a in groups[i]:
            for b in groups[j]:
                if b not in reach[a] or a in reach[b]:
                    return None
    return groups


def _par_cut(dfg, alphabet):
    edges = dfg.edge_freq
    apart = [(a, b) for a, b in combinations(alphabet, 2)
             if not ((a, b) in edges and (b, a) in edges)]
    comps = _components(alphabet, apart)
    if len(comps) < 2:
        return None
    starts, ends = set(dfg.start_freq), set(dfg.end_freq)
    good = [c for c in comps if starts.intersection(c) and ends.intersection(c)]
    if len(good) < 2:
        return None
    bad = [a for c in comps if c not in good for a in c]
    good[0] = sorted(good[0] + bad)
    return sorted(good, key=lambda g: g[0])


def _loop_cut(dfg, alphabet):
    starts = {a for a in dfg.start_freq if a in alphabet}
    ends = {a for a in dfg.end_freq if a in alphabet}
    body = starts | ends
    if not body:
        return None
    rest = [a for a in alphabet if a not in body]
    edges = [e for e in dfg.edge_freq if e[0] in alphabet and e[1] in alphabet]
    inner = [(a, b) for a, b in edges if a in rest and b in rest]
    redo = []
    for comp in _components(rest, inner):
        cs = set(comp)
        merge = False
        for a, b in edges:
            if b in cs and a in body and a not in ends:
                merge = True  # redo entered from inside the body
            if a in cs and b in body and b not in starts:
                merge = True  # redo exits into the middle of the body
        if not merge:
            entered = {b for a, b in edges if b in cs and a in ends}
            exited = {a for a, b in edges if a in cs and b in starts}
            merge = (any((e, c) not in dfg.edge_freq for c in entered for e in ends)
                     or any((c, s) not in dfg.edge_freq for c in exited for s in starts))
        if merge:
            body |= cs
        else:
            redo.append(comp)
    if not redo:
        return None
    return [sorted(body)] + redo


def find_cut(dfg: DirectlyFollowsGraph, alphabet) -> tuple[str, list[list[str]]] | None:
    """First cut found among exclusive, sequence, parallel and loop."""
    alphabet = sorted(alphabet)
    for op, finder in ((XOR, _xor_cut), (SEQ, _seq_cut), (PAR, _par_cut), (LOOP, _loop_cut)):
        parts = finder(dfg, alphabet)
        if parts:
            return op, parts
    return None


# --------------------------------------------------------------------------
# log splitting

def _seq_assign(trace, part_of, m):
    # monotone assignment of events to parts keeping as many events as possible
    n = len(trace)
    neg = -1
    score = [0] * m
    back = []
    for a in trace:
        p = part_of.get(a, -1)
        new = [0] * m
        arg = [0] * m
        best, best_j = neg, 0
        for j in range(m):
            if score[j] > best:
                best, best_j = score[j], j
            new[j] = best + (1 if p == j else 0)
            arg[j] = best_j
        score = new
        back.append(arg)
    j = max(range(m), key=lambda i: (score[i], -i))
    assign = [0] * n
    for i in range(n - 1, -1, -1):
        assign[i] = j
        j = back[i][j]
    return assign


def split_log(log: Counter, op: str, parts: list[list[str]]) -> list[Counter]:
    part_of = {a: i for i, g in enumerate(parts) for a in g}
    subs = [Counter() for _ in parts]
    for trace, n in log.items():
        if op == XOR:
            hits = Counter(part_of[a] for a in trace if a in part_of)
            i = min(hits, key=lambda k: (-hits[k], k))
            subs[i][tuple(a for a in trace if part_of.get(a) == i)] += n
        elif op == SEQ:
            assign = _seq_assign(trace, part_of, len(parts))
            for i in range(len(parts)):
                subs[i][tuple(a for a, j in zip(trace, assign) if j == i and part_of.get(a) == i)] += n
        elif op == PAR:
            for i in range(len(parts)):
                subs[i][tuple(a for a in trace if part_of.get(a) == i)] += n
        else:  # LOOP: alternate body / redo segments
            segs: list[tuple[int, tuple[str, ...]]] = []
            for a in trace:
                p = part_of.get(a, 0)
                if segs and segs[-1][0] == p:
                    segs[-1] = (p, segs[-1][1] + (a,))
                else:
                    segs.append((p, (a,)))
            fixed: list[tuple[int, tuple[str, ...]]] = []
            for p, s in segs:
                want_body = not fixed or fixed[-1][0] != 0
                if want_body and p != 0:
                    fixed.append((0, ()))
                fixed.append((p, s))
            if fixed[-1][0] != 0:
                fixed.append((0, ()))
            for p, s in fixed:
                subs[p][s] += n
    return subs
