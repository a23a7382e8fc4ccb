"""Labeled accepting Petri nets: token game, soundness, simplicity and export."""
from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from .errors import IsolatedNode, NotEnabled

TAU = None  # label of silent transitions


class Marking(Mapping[str, int]):
    """Immutable, hashable multiset of tokens over place ids."""

    __slots__ = ("_items", "_hash")

    def __init__(self, tokens: Mapping[str, int] | Iterable[str] | None = None):
        counts: dict[str, int] = {}
        if tokens is None:
            pass
        elif isinstance(tokens, Mapping):
            for p, n in tokens.items():
                if n < 0:
                    raise ValueError(f"negative token count for place {p!r}")
                if n:
                    counts[p] = counts.get(p, 0) + int(n)
        else:
            for p in tokens:
                counts[p] = counts.get(p, 0) + 1
        self._items = tuple(sorted(counts.items()))
        self._hash = hash(self._items)

    def __getitem__(self, place):
        for p, n in self._items:
            if p == place:
                return n
        raise KeyError(place)

    def get(self, place, default=0):
        return dict(self._items).get(place, default)

    def __iter__(self) -> Iterator[str]:
        return (p for p, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Marking):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self._items == Marking(other)._items
        return NotImplemented

    @property
    def size(self) -> int:
        """Total number of tokens."""
        return sum(n for _, n in self._items)

    def __repr__(self):
        return "Marking({" + ", ".join(f"{p!r}: {n}" for p, n in self._items) + "})"


@dataclass(frozen=True, eq=False)
class PetriNet:
    """A labeled accepting Petri net with unit arc weights.

    ``labels`` maps every transition id to its activity label, or to
    ``None`` (:data:`TAU`) for silent transitions.
    """

    places: tuple[str, ...]
    transitions: tuple[str, ...]
    arcs: frozenset
    initial_marking: Marking
    final_marking: Marking
    labels: Mapping[str, str | None]
    name: str = ""

    def __post_init__(self):
        places = tuple(self.places)
        transitions = tuple(self.transitions)
        object.__setattr__(self, "places", places)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "arcs", frozenset((a, b) for a, b in self.arcs))
        object.__setattr__(self, "labels", dict(self.labels))
        object.__setattr__(self, "initial_marking", Marking(self.initial_marking))
        object.__setattr__(self, "final_marking", Marking(self.final_marking))
        P, T = set(places), set(transitions)
        if len(P) != len(places) or len(T) != len(transitions):
            raise ValueError("duplicate node ids")
        if P & T:
            raise ValueError(f"ids used as both place and transition: {sorted(P & T)}")
        for a, b in self.arcs:
            if not ((a in P and b in T) or (a in T and b in P)):
                raise ValueError(f"arc {a!r}->{b!r} does not connect a place and a transition")
        for m in (self.initial_marking, self.final_marking):
            if not set(m) <= P:
                raise ValueError(f"marking references unknown places: {sorted(set(m) - P)}")
        if set(self.labels) != T:
            raise ValueError("label map must cover exactly the transitions")

    # -- compiled form -----------------------------------------------------
    @cached_property
    def place_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.places)}

    @cached_property
    def transition_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.transitions)}

    @cached_property
    def preset(self) -> tuple[tuple[int, ...], ...]:
        pi = self.place_index
        pre: dict[str, list[int]] = {t: [] for t in self.transitions}
        for a, b in self.arcs:
            if b in pre:
                pre[b].append(pi[a])
        return tuple(tuple(sorted(pre[t])) for t in self.transitions)

    @cached_property
    def postset(self) -> tuple[tuple[int, ...], ...]:
        pi = self.place_index
        post: dict[str, list[int]] = {t: [] for t in self.transitions}
        for a, b in self.arcs:
            if a in post:
                post[a].append(pi[b])
        return tuple(tuple(sorted(post[t])) for t in self.transitions)

    @cached_property
    def label_list(self) -> tuple[str | None, ...]:
        return tuple(self.labels[t] for t in self.transitions)

    def to_vector(self, m: Mapping[str, int]) -> tuple[int, ...]:
        v = [0] * len(self.places)
        for p, n in m.items():
            v[self.place_index[p]] = n
        return tuple(v)

    def from_vector(self, v) -> Marking:
        return Marking({self.places[i]: n for i, n in enumerate(v) if n})

    @cached_property
    def m0(self) -> tuple[int, ...]:
        return self.to_vector(self.initial_marking)

    @cached_property
    def mf(self) -> tuple[int, ...]:
        return self.to_vector(self.final_marking)

    def enabled_vec(self, v) -> list[int]:
        return [i for i, pre in enumerate(self.preset) if all(v[p] > 0 for p in pre)]

    def fire_vec(self, v, i: int) -> tuple[int, ...]:
        out = list(v)
        for p in self.preset[i]:
            out[p] -= 1
        for p in self.postset[i]:
            out[p] += 1
        return tuple(out)

    # -- structure ---------------------------------------------------------
    def inputs(self, node) -> list[str]:
        return sorted(a for a, b in self.arcs if b == node)

    def outputs(self, node) -> list[str]:
        return sorted(b for a, b in self.arcs if a == node)

    @property
    def visible_transitions(self) -> list[str]:
        return [t for t in self.transitions if self.labels[t] is not TAU]

    @property
    def silent_transitions(self) -> list[str]:
        return [t for t in self.transitions if self.labels[t] is TAU]

    def visible_labels(self) -> set[str]:
        return {l for l in self.labels.values() if l is not TAU}

    @property
    def size(self) -> int:
        """|P| + |Tr|."""
        return len(self.places) + len(self.transitions)

    def relabeled(self, mapping: Mapping[str, str]) -> "PetriNet":
        """Copy with node ids renamed by ``mapping`` (unmapped ids kept)."""
        f = lambda x: mapping.get(x, x)
        return PetriNet(
            [f(p) for p in self.places], [f(t) for t in self.transitions],
            {(f(a), f(b)) for a, b in self.arcs},
            {f(p): n for p, n in self.initial_marking.items()},
            {f(p): n for p, n in self.final_marking.items()},
            {f(t): l for t, l in self.labels.items()}, self.name,
        )

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "places": list(self.places),
            "transitions": [{"id": t, "label": self.labels[t]} for t in self.transitions],
            "arcs": sorted([a, b] for a, b in self.arcs),
            "m0": dict(self.initial_marking),
            "mf": dict(self.final_marking),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PetriNet":
        trs = d["transitions"]
        return cls(
            d["places"], [t["id"] for t in trs], {tuple(a) for a in d["arcs"]},
            d["m0"], d["mf"], {t["id"]: t["label"] for t in trs}, d.get("name", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "PetriNet":
        return cls.from_dict(json.loads(text))


class NetBuilder:
    """Incremental construction helper with generated ids."""

    def __init__(self, name: str = ""):
        self.name = name
        self.places: list[str] = []
        self.transitions: list[str] = []
        self.labels: dict[str, str | None] = {}
        self.arcs: set[tuple[str, str]] = set()

    def place(self, pid: str | None = None) -> str:
        pid = pid or f"p{len(self.places)}"
        self.places.append(pid)
        return pid

    def transition(self, label: str | None, tid: str | None = None) -> str:
        tid = tid or (f"t{len(self.transitions)}" if label is not TAU else f"tau{len(self.transitions)}")
        self.transitions.append(tid)
        self.labels[tid] = label
        return tid

    def arc(self, a: str, b: str):
        self.arcs.add((a, b))

    def build(self, m0, mf) -> PetriNet:
        return PetriNet(self.places, self.transitions, self.arcs, m0, mf, self.labels, self.name)


# --------------------------------------------------------------------------
# token game

def enabled(net: PetriNet, m: Mapping[str, int]) -> set[str]:
    """Transitions whose every input place holds at least one token."""
    v = net.to_vector(m)
    return {net.transitions[i] for i in net.enabled_vec(v)}


def fire(net: PetriNet, m: Mapping[str, int], t: str) -> Marking:
    """Consume one token per input place of ``t`` and produce one per output place."""
    i = net.transition_index[t]
    v = net.to_vector(m)
    if any(v[p] < 1 for p in net.preset[i]):
        raise NotEnabled(t, Marking(m))
    return net.from_vector(net.fire_vec(v, i))


def replay(net: PetriNet, firing_sequence: Iterable[str], m: Mapping[str, int] | None = None) -> Marking:
    """Fire a sequence of transition ids from ``m`` (default: initial marking)."""
    cur = net.initial_marking if m is None else Marking(m)
    for t in firing_sequence:
        cur = fire(net, cur, t)
    return cur


# --------------------------------------------------------------------------
# soundness

class Verdict(enum.Enum):
    SOUND = "sound"
    UNSOUND = "unsound"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SoundnessResult:
    verdict: Verdict
    reason: str | None = None  # NotWorkflow, ImproperCompletion, Unbounded, NoOptionToComplete, DeadTransition
    n_markings: int = 0
    detail: str = ""

    @property
    def is_sound(self) -> bool:
        return self.verdict is Verdict.SOUND

    def __str__(self):
        if self.verdict is Verdict.UNSOUND:
            return f"Unsound({self.reason})"
        return self.verdict.value.capitalize()


def workflow_places(net: PetriNet) -> tuple[str, str] | None:
    """``(source, sink)`` if ``net`` is a workflow net, else ``None``."""
    has_in = {b for a, b in net.arcs if b in net.place_index}
    has_out = {a for a, b in net.arcs if a in net.place_index}
    sources = [p for p in net.places if p not in has_in]
    sinks = [p for p in net.places if p not in has_out]
    if len(sources) != 1 or len(sinks) != 1:
        return None
    src, snk = sources[0], sinks[0]
    if net.initial_marking != Marking({src: 1}) or net.final_marking != Marking({snk: 1}):
        return None
    succ: dict[str, list[str]] = {}
    pred: dict[str, list[str]] = {}
    for a, b in net.arcs:
        succ.setdefault(a, []).append(b)
        pred.setdefault(b, []).append(a)

    def reach(start, adj):
        seen = {start}
        stack = [start]
        while stack:
            for y in adj.get(stack.pop(), ()):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen

    nodes = set(net.places) | set(net.transitions)
    if reach(src, succ) != nodes or reach(snk, pred) != nodes:
        return None
    return src, snk


def is_workflow_net(net: PetriNet) -> bool:
    return workflow_places(net) is not None


def _strictly_covers(a, b) -> bool:
    return a != b and all(x >= y for x, y in zip(a, b))


def check_soundness(net: PetriNet, marking_budget: int = 100_000) -> SoundnessResult:
    """Decide classical soundness by explicit reachability-graph exploration.

    Returns ``Unknown`` when more than ``marking_budget`` distinct markings
    are reachable.
    """
    if workflow_places(net) is None:
        return SoundnessResult(Verdict.UNSOUND, "NotWorkflow")
    m0, mf = net.m0, net.mf
    index = {m0: 0}
    order = [m0]
    parent = [-1]
    succ: list[list[int]] = [[]]
    fired = set()
    queue = deque([0])
    while queue:
        u = queue.popleft()
        v = order[u]
        for ti in net.enabled_vec(v):
            fired.add(ti)
            w = net.fire_vec(v, ti)
            j = index.get(w)
            if j is None:
                if _strictly_covers(w, mf):
                    return SoundnessResult(Verdict.UNSOUND, "ImproperCompletion", len(order),
                                           f"reachable {dict(net.from_vector(w))} strictly covers final marking")
                a = u
                while a >= 0:
                    if _strictly_covers(w, order[a]):
                        return SoundnessResult(Verdict.UNSOUND, "Unbounded", len(order),
                                               f"{dict(net.from_vector(w))} covers an ancestor marking")
                    a = parent[a]
                if len(order) >= marking_budget:
                    return SoundnessResult(Verdict.UNKNOWN, None, len(order), "marking budget exhausted")
                j = len(order)
                index[w] = j
                order.append(w)
                parent.append(u)
                succ.append([])
                queue.append(j)
            succ[u].append(j)

    fin = index.get(mf)
    if fin is None:
        return SoundnessResult(Verdict.UNSOUND, "NoOptionToComplete", len(order), "final marking unreachable")
    pred: list[list[int]] = [[] for _ in order]
    for u, outs in enumerate(succ):
        for j in outs:
            pred[j].append(u)
    can_finish = {fin}
    stack = [fin]
    while stack:
        for u in pred[stack.pop()]:
            if u not in can_finish:
                can_finish.add(u)
                stack.append(u)
    if len(can_finish) != len(order):
        stuck = next(i for i in range(len(order)) if i not in can_finish)
        return SoundnessResult(Verdict.UNSOUND, "NoOptionToComplete", len(order),
                               f"final marking unreachable from {dict(net.from_vector(order[stuck]))}")
    if len(fired) != len(net.transitions):
        dead = sorted(net.transitions[i] for i in range(len(net.transitions)) if i not in fired)
        return SoundnessResult(Verdict.UNSOUND, "DeadTransition", len(order), f"dead: {dead}")
    return SoundnessResult(Verdict.SOUND, None, len(order))


# --------------------------------------------------------------------------
# structure metrics and export

def node_degrees(net: PetriNet) -> dict[str, int]:
    deg = {n: 0 for n in (*net.places, *net.transitions)}
    for a, b in net.arcs:
        deg[a] += 1
        deg[b] += 1
    return deg


def arc_degree_simplicity(net: PetriNet) -> float:
    """1 / (1 + max(mean node degree - 2, 0)) over all places and transitions.

    A net whose nodes all have one input and one output arc scores 1; the
    score falls toward 0 as nodes gain arcs.
    """
    deg = node_degrees(net)
    if not deg:
        raise IsolatedNode("empty net")
    isolated = sorted(n for n, d in deg.items() if d == 0)
    if isolated:
        raise IsolatedNode(f"nodes without arcs: {isolated}")
    mean = sum(deg.values()) / len(deg)
    return 1.0 / (1.0 + max(mean - 2.0, 0.0))


def _dot_id(x: str) -> str:
    return '"' + str(x).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(net: PetriNet) -> str:
    """Graphviz rendering: places as circles, transitions as boxes, silent ones filled black."""
    lines = [f"digraph {_dot_id(net.name or 'petri_net')} {{", "  rankdir=LR;"]
    for p in sorted(net.places):
        tokens = net.initial_marking.get(p, 0)
        extra = ""
        if tokens:
            extra = f', xlabel="{tokens}", style=filled, fillcolor="#dddddd"'
        elif net.final_marking.get(p, 0):
            extra = ", peripheries=2"
        lines.append(f'  {_dot_id(p)} [shape=circle, label=""{extra}];')
    for t in sorted(net.transitions):
        lab = net.labels[t]
        if lab is TAU:
            lines.append(f'  {_dot_id(t)} [shape=box, style=filled, fillcolor=black, label="", width=0.15];')
        else:
            lines.append(f"  {_dot_id(t)} [shape=box, label={_dot_id(lab)}];")
    for a, b in sorted(net.arcs):
        lines.append(f"  {_dot_id(a)} -> {_dot_id(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
