"""Process trees and their translation into workflow nets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from ..petri import TAU, NetBuilder, PetriNet

SEQ, XOR, PAR, LOOP, ACT, SILENT = "seq", "xor", "and", "loop", "act", "tau"
OPERATORS = (SEQ, XOR, PAR, LOOP)


@dataclass(frozen=True)
class ProcessTree:
    op: str
    children: tuple["ProcessTree", ...] = ()
    label: str | None = None

    def __post_init__(self):
        if self.op in (ACT, SILENT):
            if self.children:
                raise ValueError("leaves have no children")
            if (self.op == ACT) != (self.label is not None):
                raise ValueError("activity leaves need a label, tau leaves must not have one")
        elif self.op in OPERATORS:
            if self.op == LOOP and len(self.children) < 2:
                raise ValueError("loop needs a do child and at least one redo child")
            if len(self.children) < 1:
                raise ValueError(f"{self.op} needs children")
        else:
            raise ValueError(f"unknown operator {self.op!r}")

    def __str__(self):
        if self.op == ACT:
            return self.label
        if self.op == SILENT:
            return "τ"
        return f"{self.op}(" + ", ".join(str(c) for c in self.children) + ")"

    def leaves(self) -> Iterator["ProcessTree"]:
        if self.op in (ACT, SILENT):
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def activities(self) -> set[str]:
        return {l.label for l in self.leaves() if l.op == ACT}

    def n_nodes(self) -> int:
        return 1 + sum(c.n_nodes() for c in self.children)


def act(label: str) -> ProcessTree:
    return ProcessTree(ACT, (), label)


def tau() -> ProcessTree:
    return ProcessTree(SILENT)


def seq(*children) -> ProcessTree:
    return ProcessTree(SEQ, tuple(children))


def xor(*children) -> ProcessTree:
    return ProcessTree(XOR, tuple(children))


def par(*children) -> ProcessTree:
    return ProcessTree(PAR, tuple(children))


def loop(do, *redo) -> ProcessTree:
    return ProcessTree(LOOP, (do, *redo))


def tree_to_petri(tree: ProcessTree, name: str = "") -> PetriNet:
    """Compose a workflow net block by block.

    Sequences chain blocks through shared places, exclusive choices share
    entry and exit places, parallel blocks are wrapped in a silent split and
    join, and loops get silent entry/exit transitions so that redo arcs never
    touch the enclosing block's places.
    """
    b = NetBuilder(name)
    source, sink = b.place("source"), b.place("sink")

    def build(node: ProcessTree, p_in: str, p_out: str):
        if node.op in (ACT, SILENT):
            t = b.transition(node.label if node.op == ACT else TAU)
            b.arc(p_in, t)
            b.arc(t, p_out)
        elif node.op == SEQ:
            cur = p_in
            for i, child in enumerate(node.children):
                nxt = p_out if i == len(node.children) - 1 else b.place()
                build(child, cur, nxt)
                cur = nxt
        elif node.op == XOR:
            for child in node.children:
                build(child, p_in, p_out)
        elif node.op == PAR:
            split, join = b.transition(TAU), b.transition(TAU)
            b.arc(p_in, split)
            b.arc(join, p_out)
            for child in node.children:
                ci, co = b.place(), b.place()
                b.arc(split, ci)
                b.arc(co, join)
                build(child, ci, co)
        else:  # LOOP
            enter, leave = b.transition(TAU), b.transition(TAU)
            head, tail = b.place(), b.place()
            b.arc(p_in, enter)
            b.arc(enter, head)
            b.arc(tail, leave)
            b.arc(leave, p_out)
            build(node.children[0], head, tail)
            for redo in node.children[1:]:
                build(redo, tail, head)

    build(tree, source, sink)
    return b.build({source: 1}, {sink: 1})
