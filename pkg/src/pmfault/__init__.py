"""Fault diagnosis for cyber-physical systems with process mining.

Anomalous sensor windows are discretized into state-transition event
logs, mined into Petri nets, enhanced with state-time histograms and
simulated; new windows are identified by majority vote over alignment
fitness and simulation similarity.
"""
from .data import MultivariateTimeSeries, SynthSpec, TimeSeriesWindow, load_csv, normalize_minmax, synth_generate
from .diagnosis import (
    DictionaryConfig,
    DiagnosisResult,
    FaultDictionaryEntry,
    build_dictionary,
    evaluate,
    identify,
    load_dictionary,
    save_dictionary,
)
from .discovery import discover, heuristics_miner, inductive_miner, tree_to_petri
from .errors import PmFaultError
from .eventlog import Centroids, EventLog, build_log, kmeans_fit
from .petri import PetriNet, arc_degree_simplicity, check_soundness, export_dot

__all__ = [
    "MultivariateTimeSeries", "SynthSpec", "TimeSeriesWindow", "load_csv", "normalize_minmax", "synth_generate",
    "DictionaryConfig", "DiagnosisResult", "FaultDictionaryEntry", "build_dictionary", "evaluate", "identify",
    "load_dictionary", "save_dictionary", "discover", "heuristics_miner", "inductive_miner", "tree_to_petri",
    "PmFaultError", "Centroids", "EventLog", "build_log", "kmeans_fit", "PetriNet", "arc_degree_simplicity",
    "check_soundness", "export_dot",
]
