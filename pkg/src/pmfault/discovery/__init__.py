"""Process discovery: directly-follows graphs, inductive and heuristics miners."""
from .dfg import DirectlyFollowsGraph, build_dfg
from .heuristics import CausalNet, heuristics_miner, mine_causal_net
from .inductive import inductive_miner
from .tree import ProcessTree, act, loop, par, seq, tau, tree_to_petri, xor

MINERS = ("imf", "hm")


def check_miner(miner: str) -> str:
    """Normalized miner name; raises ValueError for anything unsupported."""
    m = str(miner).lower()
    if m == "ilp":
        raise ValueError("the ILP miner is out of scope for this package "
                         "(its integer programs need an external solver); use 'imf' or 'hm'")
    if m not in MINERS:
        raise ValueError(f"unknown miner {miner!r}; choose one of {MINERS}")
    return m


def discover(log, miner: str = "imf", noise_threshold: float = 0.75, and_threshold: float = 0.65, name: str = ""):
    """Run the named miner and return a Petri net.

    ``noise_threshold`` is the IMf filter threshold for ``"imf"`` and the
    dependency threshold for ``"hm"``.
    """
    if check_miner(miner) == "imf":
        return tree_to_petri(inductive_miner(log, noise_threshold), name)
    return heuristics_miner(log, noise_threshold, and_threshold, name)


__all__ = [
    "DirectlyFollowsGraph", "build_dfg", "CausalNet", "heuristics_miner", "mine_causal_net",
    "inductive_miner", "ProcessTree", "act", "loop", "par", "seq", "tau", "tree_to_petri", "xor",
    "discover", "check_miner", "MINERS",
]
