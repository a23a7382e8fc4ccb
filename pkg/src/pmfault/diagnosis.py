"""Fault dictionaries, fault identification and the evaluation harness."""
from __future__ import annotations

import csv
import io
import json
import logging
import re
import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import discovery
from .conformance import (
    DEFAULT_NODE_BUDGET,
    DEFAULT_TIME_LIMIT_S,
    align,
    best_over_pool,
    soundness_of,
    worst_alignment_cost,
)
from .data import TimeSeriesWindow
from .detection import LabeledWindowPool, compose_training_set
from .errors import (
    DictionaryFormatError,
    NoTransitions,
    NoTransitionsInWindow,
    PmFaultError,
    SearchBudgetExceeded,
    TooManyFailures,
    UnsoundModel,
)
from .eventlog import Centroids, assign_states, build_log, case_from_states, kmeans_fit, stack_values
from .petri import PetriNet, SoundnessResult, Verdict, arc_degree_simplicity, export_dot
from .stochastic import (
    RACE,
    DurationHistogram,
    SimulatedWindow,
    StochasticPetriNet,
    collect_state_times,
    enhance,
    histograms_from_csv,
    histograms_to_csv,
    simulate_pool,
    state_histograms,
    window_to_csv,
)

log = logging.getLogger(__name__)

FORMAT = "pmfault-dictionary/1"


@dataclass(frozen=True)
class DictionaryConfig:
    k: int = 5
    miner: str = "imf"
    noise_threshold: float = 0.75
    and_threshold: float = 0.65
    bins: int = 10
    n_sims: int = 300
    max_events: int = 200
    policy: str = RACE
    seed: int = 0
    soundness_budget: int = 100_000

    def validate(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0.0 <= self.noise_threshold <= 1.0:
            raise ValueError("noise_threshold must lie in [0, 1]")
        discovery.check_miner(self.miner)
        if self.bins < 1 or self.n_sims < 1 or self.max_events < 1:
            raise ValueError("bins, n_sims and max_events must be positive")


@dataclass(frozen=True, eq=False)
class FaultDictionaryEntry:
    fault_label: str
    centroids: Centroids
    spn: StochasticPetriNet
    sim_pool: tuple[SimulatedWindow, ...]
    histograms: Mapping[int, DurationHistogram]
    soundness: SoundnessResult
    provenance: Mapping = field(default_factory=dict)

    @property
    def net(self) -> PetriNet:
        return self.spn.net

    @property
    def s_arc(self) -> float:
        return arc_degree_simplicity(self.net)


def _fault_seeds(seed: int, index: int) -> tuple[int, int]:
    a, b = np.random.SeedSequence([int(seed), index]).generate_state(2)
    return int(a), int(b)


def build_entry(label: str, windows: Sequence[TimeSeriesWindow], cfg: DictionaryConfig, rate_hz: float,
                index: int = 0) -> FaultDictionaryEntry:
    """Clustering, event log, discovery, enhancement and simulation for one fault."""
    km_seed, sim_seed = _fault_seeds(cfg.seed, index)
    try:
        centroids = kmeans_fit(stack_values(windows), cfg.k, km_seed)
        elog = build_log(windows, centroids, rate_hz, label)
        net = discovery.discover(elog, cfg.miner, cfg.noise_threshold, cfg.and_threshold, name=label)
        sound = soundness_of(net, cfg.soundness_budget)
        if sound.verdict is not Verdict.SOUND:
            log.warning("fault %s: discovered net is %s", label, sound)
        hists = state_histograms(collect_state_times(elog), cfg.bins)
        spn = enhance(net, hists)
        failures = Counter()
        try:
            pool = simulate_pool(spn, cfg.n_sims, sim_seed, centroids, rate_hz, cfg.max_events, cfg.policy,
                                 min_success=0.5 if sound.verdict is not Verdict.UNSOUND else 0.0,
                                 failures=failures)
        except TooManyFailures:
            if sound.verdict is Verdict.SOUND:
                raise
            pool = []
            log.warning("fault %s: simulation failed on a non-sound net", label)
    except PmFaultError as exc:
        exc.args = (f"[fault {label}] {exc}",)
        exc.fault_label = label
        raise
    prov = {"K": cfg.k, "miner": cfg.miner, "noise_threshold": cfg.noise_threshold,
            "kmeans_seed": km_seed, "simulation_seed": sim_seed, "policy": cfg.policy,
            "n_windows": len(windows), "n_cases": len(elog), "n_events": elog.n_events,
            "skipped_windows": len(elog.skipped), "simulation_failures": dict(failures)}
    return FaultDictionaryEntry(label, centroids, spn, tuple(pool), hists, sound, prov)


def build_dictionary(training: Mapping[str, Sequence[TimeSeriesWindow]], cfg: DictionaryConfig,
                     rate_hz: float) -> list[FaultDictionaryEntry]:
    """One entry per fault label, in sorted label order."""
    cfg.validate()
    if not training:
        raise ValueError("no training windows")
    for label, ws in training.items():
        if len(ws) < 2:
            raise ValueError(f"fault {label!r} needs at least two training windows")
    return [build_entry(label, training[label], cfg, rate_hz, i) for i, label in enumerate(sorted(training))]


# --------------------------------------------------------------------------
# identification

@dataclass(frozen=True)
class FaultScores:
    fitness: float
    best_rmse: float
    best_r2: float
    cc_time_s: float
    trace_length: int
    alignment_cost: int


@dataclass(frozen=True)
class DiagnosisResult:
    fault_label: str
    labels: tuple[str, ...]
    scores: tuple[FaultScores, ...]
    vote_indices: tuple[int, int, int]

    def to_dict(self) -> dict:
        return {"fault_label": self.fault_label, "vote_indices": list(self.vote_indices),
                "scores": {l: asdict(s) for l, s in zip(self.labels, self.scores)}}


def majority_vote(indices: Sequence[int]) -> int:
    """Index named by at least two voters; the first voter (fitness) breaks a three-way split."""
    counts = Counter(indices)
    top, n = max(counts.items(), key=lambda kv: (kv[1], -list(indices).index(kv[0])))
    return top if n >= 2 else indices[0]


def _argbest(values, maximize):
    vals = np.asarray(values, dtype=float)
    vals = np.where(np.isnan(vals), -np.inf if maximize else np.inf, vals)
    return int(np.argmax(vals) if maximize else np.argmin(vals))


def window_trace(window, centroids: Centroids, rate_hz: float) -> tuple[str, ...]:
    """Event-log trace of ``window`` under ``centroids``; empty if the window never changes state."""
    try:
        return case_from_states(assign_states(window, centroids), rate_hz).trace
    except NoTransitions:
        return ()


def score_entry(window, entry: FaultDictionaryEntry, rate_hz: float,
                node_budget: int = DEFAULT_NODE_BUDGET,
                time_limit_s: float | None = DEFAULT_TIME_LIMIT_S) -> FaultScores:
    trace = window_trace(window, entry.centroids, rate_hz)
    if entry.soundness.verdict is Verdict.UNSOUND:
        raise UnsoundModel(f"fault {entry.fault_label}: net is {entry.soundness}")
    t0 = time.perf_counter()
    al = align(trace, entry.net, check_sound=False, node_budget=node_budget, time_limit_s=time_limit_s)
    worst = worst_alignment_cost(trace, entry.net, check_sound=False)
    cc = time.perf_counter() - t0
    fit = 1.0 if worst == 0 else 1.0 - al.cost / worst
    best_rmse, best_r2 = best_over_pool(getattr(window, "values", window), entry.sim_pool)
    return FaultScores(fit, best_rmse, best_r2, cc, len(trace), al.cost)


def identify(window, dictionary: Sequence[FaultDictionaryEntry], rate_hz: float,
             node_budget: int = DEFAULT_NODE_BUDGET,
             time_limit_s: float | None = DEFAULT_TIME_LIMIT_S) -> DiagnosisResult:
    """Score ``window`` against every fault and take the majority of the three best indices."""
    if not dictionary:
        raise ValueError("empty dictionary")
    if len(window) < 2:
        raise NoTransitionsInWindow("window has fewer than two samples")
    scores = [score_entry(window, e, rate_hz, node_budget, time_limit_s) for e in dictionary]
    if all(s.trace_length == 0 for s in scores):
        raise NoTransitionsInWindow("window maps to a single state under every fault's clustering")
    idx = (_argbest([s.fitness for s in scores], True),
           _argbest([s.best_rmse for s in scores], False),
           _argbest([s.best_r2 for s in scores], True))
    labels = tuple(e.fault_label for e in dictionary)
    return DiagnosisResult(labels[majority_vote(idx)], labels, tuple(scores), idx)


# --------------------------------------------------------------------------
# evaluation

def f1_score(tp: int, fp: int, fn: int) -> float:
    """2TP / (2TP + FP + FN); 0 when undefined."""
    den = 2 * tp + fp + fn
    return 2 * tp / den if den else 0.0


@dataclass
class EvaluationReport:
    labels: tuple[str, ...]
    confusion: dict[tuple[str, str], int]  # (true, predicted) -> count
    cc_times: dict[str, list[float]]        # per dictionary fault
    results: list[tuple[str, DiagnosisResult]]

    def counts(self, label):
        tp = self.confusion.get((label, label), 0)
        fp = sum(n for (t, p), n in self.confusion.items() if p == label and t != label)
        fn = sum(n for (t, p), n in self.confusion.items() if t == label and p != label)
        return tp, fp, fn

    def f1(self, label) -> float:
        return f1_score(*self.counts(label))

    @property
    def macro_f1(self) -> float:
        return float(np.mean([self.f1(l) for l in self.labels]))

    @property
    def all_cc_times(self) -> list[float]:
        return [t for ts in self.cc_times.values() for t in ts]

    @property
    def mean_cc_time_s(self) -> float:
        ts = self.all_cc_times
        return float(np.mean(ts)) if ts else float("nan")

    @property
    def median_cc_time_s(self) -> float:
        ts = self.all_cc_times
        return float(np.median(ts)) if ts else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fault", "tp", "fp", "fn", "f1", "mean_cc_time_s"])
        for l in self.labels:
            tp, fp, fn = self.counts(l)
            ts = self.cc_times.get(l, [])
            w.writerow([l, tp, fp, fn, f"{f1_score(tp, fp, fn):.6f}",
                        f"{np.mean(ts):.6f}" if ts else ""])
        return buf.getvalue()


def evaluate(dictionary: Sequence[FaultDictionaryEntry], test: Mapping[str, Sequence[TimeSeriesWindow]],
             rate_hz: float, **kw) -> EvaluationReport:
    """Identify every test window and tally one-vs-rest counts per fault."""
    if len(test) < 2:
        raise ValueError("test windows must cover at least two labels")
    labels = tuple(e.fault_label for e in dictionary)
    confusion: Counter = Counter()
    cc = {l: [] for l in labels}
    results = []
    for true_label in sorted(test):
        for w in test[true_label]:
            res = identify(w, dictionary, rate_hz, **kw)
            confusion[(true_label, res.fault_label)] += 1
            for l, s in zip(res.labels, res.scores):
                cc[l].append(s.cc_time_s)
            results.append((true_label, res))
    all_labels = tuple(sorted(set(labels) | set(test)))
    return EvaluationReport(all_labels if set(test) - set(labels) else labels, dict(confusion), cc, results)


@dataclass
class AblationRow:
    acc: float
    f1_mean: float
    f1_std: float
    per_fault_mean: dict[str, float]
    runs: list[float]


def ablate_accuracy(pools: Mapping[str, LabeledWindowPool], acc_levels: Sequence[float], cfg: DictionaryConfig,
                    rate_hz: float, seed: int = 0, repetitions: int = 3, train_fraction: float = 0.75,
                    **kw) -> list[AblationRow]:
    """Macro F1 as the training sets are contaminated with normal windows.

    Per repetition, each fault's positives are split into a fixed
    train/test holdout; for every accuracy level the training windows are
    recomposed with :func:`compose_training_set` and the dictionary is
    rebuilt and evaluated on the untouched test windows.
    """
    from .data import split_holdout

    for a in acc_levels:
        if not 0 < a <= 1:
            raise ValueError(f"accuracy level {a} outside (0, 1]")
    runs: dict[float, list[tuple[float, dict[str, float]]]] = {a: [] for a in acc_levels}
    for r in range(repetitions):
        rep_seed = int(np.random.SeedSequence([seed, r]).generate_state(1)[0])
        train, test = {}, {}
        for j, (label, pool) in enumerate(sorted(pools.items())):
            tr, te = split_holdout(list(pool.positives), train_fraction, rep_seed + j)
            train[label], test[label] = tr, te
        for a in acc_levels:
            composed = {}
            for j, label in enumerate(sorted(pools)):
                sub = LabeledWindowPool(tuple(train[label]), pools[label].negatives)
                composed[label] = compose_training_set(sub, a, len(train[label]), rep_seed + 101 * j)
            dictionary = build_dictionary(composed, replace(cfg, seed=rep_seed), rate_hz)
            rep = evaluate(dictionary, test, rate_hz, **kw)
            runs[a].append((rep.macro_f1, {l: rep.f1(l) for l in rep.labels}))
    rows = []
    for a in acc_levels:
        f1s = [m for m, _ in runs[a]]
        per = {l: float(np.mean([d[l] for _, d in runs[a]])) for l in runs[a][0][1]}
        rows.append(AblationRow(a, float(np.mean(f1s)), float(np.std(f1s)), per, f1s))
    return rows


# --------------------------------------------------------------------------
# factorial sweep over K x miner

@dataclass
class SweepRow:
    k: int
    miner: str
    status: str  # "ok", "NS" or "TE"
    values: dict[str, list[float]]  # metric -> one value per repetition

    def cell(self, metric) -> str:
        vals = self.values.get(metric, [])
        if self.status != "ok" and (metric.startswith("f1") or metric.endswith("cc_time_s")):
            return self.status
        if not vals:
            return ""
        sd = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        return f"{np.mean(vals):.4g}±{sd:.2g}"

    def mean(self, metric) -> float:
        return float(np.mean(self.values[metric]))


SWEEP_METRICS = ("s_arc", "r2", "rmse", "f1", "cc_time_s", "median_cc_time_s", "net_size")


def sweep(train: Mapping[str, Sequence[TimeSeriesWindow]], test: Mapping[str, Sequence[TimeSeriesWindow]],
          ks: Sequence[int], miners: Sequence[str], cfg: DictionaryConfig, rate_hz: float,
          repetitions: int = 3, **kw) -> list[SweepRow]:
    """Two-factor experiment; R²/RMSE compare each fault's test windows with its own pool."""
    rows = []
    for k in ks:
        for miner in miners:
            vals = {m: [] for m in SWEEP_METRICS}
            status = "ok"
            for r in range(repetitions):
                rep_cfg = replace(cfg, k=k, miner=miner, seed=cfg.seed + r)
                d = build_dictionary(train, rep_cfg, rate_hz)
                vals["s_arc"].append(float(np.mean([e.s_arc for e in d])))
                vals["net_size"].append(float(np.mean([e.net.size for e in d])))
                rmses, r2s = [], []
                for e in d:
                    for w in test.get(e.fault_label, []):
                        b_rmse, b_r2 = best_over_pool(w.values, e.sim_pool)
                        rmses.append(b_rmse)
                        r2s.append(b_r2)
                vals["rmse"].append(float(np.mean(rmses)))
                vals["r2"].append(float(np.mean(r2s)))
                if status != "ok":
                    continue
                if any(e.soundness.verdict is Verdict.UNSOUND for e in d):
                    status = "NS"
                    continue
                try:
                    rep = evaluate(d, test, rate_hz, **kw)
                except SearchBudgetExceeded:
                    status = "TE"
                    continue
                vals["f1"].append(rep.macro_f1)
                vals["cc_time_s"].append(rep.mean_cc_time_s)
                vals["median_cc_time_s"].append(rep.median_cc_time_s)
                for l in rep.labels:
                    vals.setdefault(f"f1_{l}", []).append(rep.f1(l))
            rows.append(SweepRow(k, miner, status, vals))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    extra = sorted({m for r in rows for m in r.values if m.startswith("f1_")})
    metrics = list(SWEEP_METRICS) + extra
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["K", "miner", "status", *metrics])
    for r in rows:
        w.writerow([r.k, r.miner, r.status, *(r.cell(m) for m in metrics)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# persistence

def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label) or "fault"


def save_dictionary(entries: Sequence[FaultDictionaryEntry], directory, rate_hz: float,
                    feature_names: Sequence[str]) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    faults = []
    for e in entries:
        sub = root / _slug(e.fault_label)
        (sub / "sims").mkdir(parents=True, exist_ok=True)
        for old in (sub / "sims").glob("*.csv"):
            old.unlink()
        (sub / "net.json").write_text(e.net.to_json())
        (sub / "net.dot").write_text(export_dot(e.net))
        (sub / "hist.csv").write_text(histograms_to_csv(e.histograms))
        (sub / "centroids.json").write_text(json.dumps(e.centroids.to_dict(), indent=1))
        for i, s in enumerate(e.sim_pool):
            (sub / "sims" / f"{i:04d}.csv").write_text(window_to_csv(s.values, feature_names))
        (sub / "sims" / "pairs.json").write_text(json.dumps([[list(p) for p in s.pairs] for s in e.sim_pool]))
        faults.append({
            "label": e.fault_label,
            "dir": sub.name,
            "soundness": e.soundness.verdict.value,
            "soundness_reason": e.soundness.reason,
            "s_arc": e.s_arc,
            "support_counts": {str(k): h.support_count for k, h in e.histograms.items()},
            "n_sims": len(e.sim_pool),
            "provenance": dict(e.provenance),
        })
    manifest = {"format": FORMAT, "rate_hz": rate_hz, "feature_names": list(feature_names), "faults": faults}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return root


def _need(d, key, typ, where="manifest"):
    if key not in d:
        raise DictionaryFormatError(key, f"missing from {where}")
    if not isinstance(d[key], typ):
        raise DictionaryFormatError(key, f"expected {typ.__name__ if isinstance(typ, type) else typ}")
    return d[key]


def load_dictionary(directory) -> tuple[list[FaultDictionaryEntry], dict]:
    """Inverse of :func:`save_dictionary`; returns ``(entries, manifest)``."""
    root = Path(directory)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except FileNotFoundError:
        raise DictionaryFormatError("manifest.json", "file not found") from None
    except json.JSONDecodeError as exc:
        raise DictionaryFormatError("manifest.json", f"not valid JSON ({exc})") from None
    if not isinstance(manifest, dict):
        raise DictionaryFormatError("manifest.json", "expected an object")
    if _need(manifest, "format", str) != FORMAT:
        raise DictionaryFormatError("format", f"expected {FORMAT!r}")
    _need(manifest, "rate_hz", (int, float))
    _need(manifest, "feature_names", list)
    faults = _need(manifest, "faults", list)
    if not faults:
        raise DictionaryFormatError("faults", "empty")
    entries = []
    for i, f in enumerate(faults):
        where = f"faults[{i}]"
        if not isinstance(f, dict):
            raise DictionaryFormatError(where, "expected an object")
        label = _need(f, "label", str, where)
        sub = root / _need(f, "dir", str, where)
        verdict = _need(f, "soundness", str, where)
        try:
            verdict = Verdict(verdict)
        except ValueError:
            raise DictionaryFormatError(f"{where}.soundness", f"unknown verdict {verdict!r}") from None
        support = {int(k): v for k, v in f.get("support_counts", {}).items()}
        current = "net.json"
        try:
            net = PetriNet.from_json((sub / "net.json").read_text())
            current = "hist.csv"
            hists = histograms_from_csv((sub / "hist.csv").read_text(), support)
            current = "centroids.json"
            centroids = Centroids.from_dict(json.loads((sub / "centroids.json").read_text()))
            current = "sims/pairs.json"
            pairs = json.loads((sub / "sims" / "pairs.json").read_text())
            pool = []
            for j, pr in enumerate(pairs):
                current = f"sims/{j:04d}.csv"
                vals = np.loadtxt(sub / "sims" / f"{j:04d}.csv", delimiter=",", skiprows=1, ndmin=2)[:, 1:]
                pool.append(SimulatedWindow(tuple((int(s), float(d)) for s, d in pr), vals, manifest["rate_hz"]))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DictionaryFormatError(f"{sub.name}/{current}", f"unreadable ({exc})") from None
        spn = enhance(net, hists)
        sound = SoundnessResult(verdict, f.get("soundness_reason"))
        entries.append(FaultDictionaryEntry(label, centroids, spn, tuple(pool), hists, sound,
                                            f.get("provenance", {})))
    return entries, manifest
