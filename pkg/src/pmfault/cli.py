"""Command-line driver: synth, build, diagnose, sweep, ablate, export-dot.

Every command reads one YAML config file (see README); flags and
``--set section.key=value`` override file values.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import yaml

from . import diagnosis as dg
from .data import (
    NORMAL,
    SynthSpec,
    load_csv,
    normalize_minmax,
    read_spans_csv,
    read_windows_csv,
    rewindow,
    split_holdout,
    synth_generate,
    windows_by_label,
    windows_to_csv,
)
from .detection import LabeledWindowPool
from .discovery import check_miner
from .errors import ConfigError, EmptyFile, NoTransitionsInWindow, PmFaultError
from .petri import PetriNet, Verdict, export_dot

log = logging.getLogger("pmfault")

DEFAULTS = {
    "output_dir": "pmfault-out",
    "seed": 0,
    "data": {
        "source": "synth",
        "train_fraction": 0.667,
        "synth": {},
        "csv": {"series": None, "windows": None, "feature_columns": None, "sampling_rate_hz": None},
    },
    "dictionary": {
        "k": 5,
        "miner": "imf",
        "noise_threshold": 0.75,
        "and_threshold": 0.65,
        "bins": 10,
        "n_sims": 300,
        "max_events": 200,
        "policy": "race",
    },
    "conformance": {"node_budget": 1_000_000, "time_limit_s": 300.0},
    "sweep": {"ks": [2, 3, 4, 5, 6], "miners": ["imf", "hm"], "repetitions": 3},
    "ablate": {"acc_levels": [1.0, 0.9, 0.75, 0.5], "repetitions": 3},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "synth":
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot set {dotted!r}: {k!r} is not a mapping")
    cur[keys[-1]] = value


@dataclass
class RunConfig:
    output_dir: Path
    seed: int
    data: dict
    dictionary: dg.DictionaryConfig
    node_budget: int
    time_limit_s: float | None
    sweep_ks: list[int]
    sweep_miners: list[str]
    sweep_repetitions: int
    acc_levels: list[float]
    ablate_repetitions: int
    raw: dict

    @property
    def align_kw(self) -> dict:
        return {"node_budget": self.node_budget, "time_limit_s": self.time_limit_s}

    def synth_spec(self) -> SynthSpec:
        known = {f.name for f in fields(SynthSpec)}
        extra = set(self.data["synth"]) - known
        if extra:
            raise ConfigError(f"unknown data.synth keys {sorted(extra)}")
        params = dict(self.data["synth"])
        params.setdefault("seed", self.seed)
        if "labels" in params:
            params["labels"] = tuple(params["labels"])
        return SynthSpec(**params)


def build_config(raw_file: dict | None = None, overrides: Sequence[str] = (), **flags) -> RunConfig:
    """Merge defaults, file contents, ``key=value`` overrides and explicit flags; then validate."""
    merged = _merge(DEFAULTS, raw_file or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        patch: dict = {}
        _set_path(patch, key.strip(), yaml.safe_load(val))
        merged = _merge(merged, patch)
    flag_paths = {"output_dir": "output_dir", "seed": "seed", "k": "dictionary.k", "miner": "dictionary.miner",
                  "noise_threshold": "dictionary.noise_threshold", "n_sims": "dictionary.n_sims"}
    for name, val in flags.items():
        if val is not None:
            patch = {}
            _set_path(patch, flag_paths[name], val)
            merged = _merge(merged, patch)

    d = merged["dictionary"]
    try:
        dcfg = dg.DictionaryConfig(k=int(d["k"]), miner=str(d["miner"]), noise_threshold=float(d["noise_threshold"]),
                                   and_threshold=float(d["and_threshold"]), bins=int(d["bins"]),
                                   n_sims=int(d["n_sims"]), max_events=int(d["max_events"]),
                                   policy=str(d["policy"]), seed=int(merged["seed"]))
        dcfg.validate()
        for m in merged["sweep"]["miners"]:
            check_miner(m)
        ks = [int(k) for k in merged["sweep"]["ks"]]
        if any(k < 2 for k in ks):
            raise ValueError("sweep.ks entries must be at least 2")
        levels = [float(a) for a in merged["ablate"]["acc_levels"]]
        if any(not 0 < a <= 1 for a in levels):
            raise ValueError("ablate.acc_levels must lie in (0, 1]")
        tf = float(merged["data"]["train_fraction"])
        if not 0 < tf < 1:
            raise ValueError("data.train_fraction must lie in (0, 1)")
        if merged["data"]["source"] not in ("synth", "csv"):
            raise ValueError("data.source must be 'synth' or 'csv'")
        if dcfg.policy not in ("race", "preselection"):
            raise ValueError("dictionary.policy must be 'race' or 'preselection'")
        tl = merged["conformance"]["time_limit_s"]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        output_dir=Path(merged["output_dir"]),
        seed=int(merged["seed"]),
        data=merged["data"],
        dictionary=dcfg,
        node_budget=int(merged["conformance"]["node_budget"]),
        time_limit_s=None if tl is None else float(tl),
        sweep_ks=ks,
        sweep_miners=[check_miner(m) for m in merged["sweep"]["miners"]],
        sweep_repetitions=int(merged["sweep"]["repetitions"]),
        acc_levels=levels,
        ablate_repetitions=int(merged["ablate"]["repetitions"]),
        raw=merged,
    )


def load_config(path=None, overrides: Sequence[str] = (), **flags) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
    return build_config(raw, overrides, **flags)


def _out(cfg: RunConfig, *parts) -> Path:
    root = cfg.output_dir
    if not root.parent.exists():
        raise ConfigError(f"parent of output directory {root} does not exist")
    path = root.joinpath(*parts)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --------------------------------------------------------------------------
# dataset

DATASET_FORMAT = "pmfault-dataset/1"


@dataclass
class Dataset:
    train: dict[str, list]
    test: dict[str, list]
    normal: list
    rate_hz: float
    feature_names: tuple[str, ...]


def _source_windows(cfg: RunConfig):
    if cfg.data["source"] == "synth":
        spec = cfg.synth_spec()
        ts, ws = synth_generate(spec)
        info = {"synth": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()}}
    else:
        c = cfg.data["csv"]
        missing = [k for k in ("series", "windows", "feature_columns", "sampling_rate_hz") if not c.get(k)]
        if missing:
            raise ConfigError(f"data.csv needs {missing}")
        ts = load_csv(c["series"], c["feature_columns"], float(c["sampling_rate_hz"]))
        ws = [ts.window(s, e, lab) for s, e, lab in read_spans_csv(c["windows"])]
        info = {"csv": {"series": str(c["series"]), "windows": str(c["windows"])}}
    ts = normalize_minmax(ts)
    return ts, rewindow(ts, ws), info


def cmd_synth(cfg: RunConfig) -> Path:
    """Normalize, window and split the configured data into a dataset directory."""
    out = _out(cfg, "dataset")
    ts, ws, info = _source_windows(cfg)
    by = windows_by_label(ws)
    if len(by) < 1:
        raise ConfigError("data contains no fault windows")
    tf = float(cfg.data["train_fraction"])
    train, test = [], []
    for i, label in enumerate(sorted(by)):
        tr, te = split_holdout(by[label], tf, cfg.seed + i)
        train += tr
        test += te
    normal = [w for w in ws if w.label == NORMAL]
    names = ts.feature_names
    (out / "train.csv").write_text(windows_to_csv(train, names))
    (out / "test.csv").write_text(windows_to_csv(test, names))
    (out / "normal.csv").write_text(windows_to_csv(normal, names))
    count = lambda xs: {l: sum(1 for w in xs if w.label == l) for l in sorted(by)}
    manifest = {"format": DATASET_FORMAT, "seed": cfg.seed, "sampling_rate_hz": ts.sampling_rate_hz,
                "feature_names": list(names), "labels": sorted(by), "train_fraction": tf,
                "split": {"train": count(train), "test": count(test)}, "normal": len(normal), **info}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    print(f"dataset written to {out}: " + ", ".join(
        f"{l} {manifest['split']['train'][l]}/{manifest['split']['test'][l]}" for l in manifest["labels"])
        + f", normal {len(normal)}")
    return out


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except FileNotFoundError:
        raise ConfigError(f"{d} is not a dataset directory (no manifest.json); run 'synth' first") from None
    if manifest.get("format") != DATASET_FORMAT:
        raise ConfigError(f"{d / 'manifest.json'}: unexpected format {manifest.get('format')!r}")
    train, _ = read_windows_csv(d / "train.csv")
    test, _ = read_windows_csv(d / "test.csv")
    normal, _ = read_windows_csv(d / "normal.csv")
    return Dataset(windows_by_label(train), windows_by_label(test), normal,
                   float(manifest["sampling_rate_hz"]), tuple(manifest["feature_names"]))


# --------------------------------------------------------------------------
# commands

def cmd_build(cfg: RunConfig, dataset_dir=None) -> Path:
    ds = load_dataset(dataset_dir or cfg.output_dir / "dataset")
    entries = dg.build_dictionary(ds.train, cfg.dictionary, ds.rate_hz)
    out = dg.save_dictionary(entries, _out(cfg, "dictionary"), ds.rate_hz, ds.feature_names)
    for e in entries:
        tag = "NS" if e.soundness.verdict is Verdict.UNSOUND else str(e.soundness)
        print(f"{e.fault_label}: {tag}  S_arc={e.s_arc:.4f}  |P|+|Tr|={e.net.size}  sims={len(e.sim_pool)}")
        if e.soundness.verdict is Verdict.UNSOUND:
            log.warning("fault %s: net is not sound; persisted anyway", e.fault_label)
    print(f"dictionary written to {out}")
    return out


def cmd_diagnose(cfg: RunConfig, dictionary_dir=None, windows_csv=None) -> Path:
    entries, manifest = dg.load_dictionary(dictionary_dir or cfg.output_dir / "dictionary")
    rate = float(manifest["rate_hz"])
    try:
        windows, _ = read_windows_csv(windows_csv or cfg.output_dir / "dataset" / "test.csv")
    except EmptyFile:
        windows = []
    labels = tuple(e.fault_label for e in entries)
    confusion: dict = {}
    cc = {l: [] for l in labels}
    per_window = []
    for w in windows:
        wid = f"{w.parent_id}:{w.start}"
        try:
            res = dg.identify(w, entries, rate, **cfg.align_kw)
        except NoTransitionsInWindow as exc:
            per_window.append({"window_id": wid, "label": w.label, "error": str(exc)})
            continue
        confusion[(w.label, res.fault_label)] = confusion.get((w.label, res.fault_label), 0) + 1
        for l, s in zip(res.labels, res.scores):
            cc[l].append(s.cc_time_s)
        per_window.append({"window_id": wid, "label": w.label, **res.to_dict()})
    report = dg.EvaluationReport(labels, confusion, cc, [])
    out = _out(cfg, "reports")
    (out / "report.csv").write_text(report.to_csv())
    (out / "results.json").write_text(json.dumps(per_window, indent=1))
    sys.stdout.write(report.to_csv())
    return out / "report.csv"


def cmd_sweep(cfg: RunConfig, dataset_dir=None) -> Path:
    ds = load_dataset(dataset_dir or cfg.output_dir / "dataset")
    rows = dg.sweep(ds.train, ds.test, cfg.sweep_ks, cfg.sweep_miners, cfg.dictionary, ds.rate_hz,
                    cfg.sweep_repetitions, **cfg.align_kw)
    text = dg.sweep_to_csv(rows)
    path = _out(cfg, "reports") / "sweep.csv"
    path.write_text(text)
    sys.stdout.write(text)
    return path


def ablation_to_csv(rows: Sequence[dg.AblationRow]) -> str:
    labels = sorted(rows[0].per_fault_mean) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["acc", "f1_mean", "f1_std", *(f"f1_{l}" for l in labels)])
    for r in rows:
        w.writerow([r.acc, f"{r.f1_mean:.6f}", f"{r.f1_std:.6f}", *(f"{r.per_fault_mean[l]:.6f}" for l in labels)])
    return buf.getvalue()


def cmd_ablate(cfg: RunConfig, dataset_dir=None) -> Path:
    ds = load_dataset(dataset_dir or cfg.output_dir / "dataset")
    if not ds.normal:
        raise ConfigError("ablation needs normal windows in the dataset")
    pools = {l: LabeledWindowPool(tuple(ds.train[l] + ds.test.get(l, [])), tuple(ds.normal)) for l in ds.train}
    rows = dg.ablate_accuracy(pools, cfg.acc_levels, cfg.dictionary, ds.rate_hz, cfg.seed,
                              cfg.ablate_repetitions, float(cfg.data["train_fraction"]), **cfg.align_kw)
    text = ablation_to_csv(rows)
    path = _out(cfg, "reports") / "ablation.csv"
    path.write_text(text)
    sys.stdout.write(text)
    return path


def cmd_export_dot(source, out=None) -> list[Path]:
    """DOT for one ``net.json`` or for every net of a dictionary directory."""
    src = Path(source)
    if src.is_dir():
        entries, _ = dg.load_dictionary(src)
        nets = [(e.fault_label, e.net) for e in entries]
        target = Path(out) if out else src
        target.mkdir(parents=True, exist_ok=True)
        paths = [target / f"{dg._slug(label)}.dot" for label, _ in nets]
    else:
        nets = [(src.stem, PetriNet.from_json(src.read_text()))]
        paths = [Path(out) if out else src.with_suffix(".dot")]
    for (_, net), p in zip(nets, paths):
        p.write_text(export_dot(net))
        print(p)
    return paths


# --------------------------------------------------------------------------
# argument parsing

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. --set dictionary.bins=20")
    common.add_argument("-o", "--output-dir", dest="output_dir")
    common.add_argument("--seed", type=int)
    common.add_argument("-k", "--k", type=int, dest="k")
    common.add_argument("--miner")
    common.add_argument("--noise-threshold", type=float, dest="noise_threshold")
    common.add_argument("--n-sims", type=int, dest="n_sims")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pmfault", description="Process-mining fault diagnosis pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="prepare a dataset directory")
    b = sub.add_parser("build", parents=[common], help="build the fault dictionary")
    b.add_argument("--dataset")
    d = sub.add_parser("diagnose", parents=[common], help="identify faults of windows")
    d.add_argument("--dictionary")
    d.add_argument("--windows", help="windows CSV (default: the dataset's test split)")
    s = sub.add_parser("sweep", parents=[common], help="K x miner factorial table")
    s.add_argument("--dataset")
    a = sub.add_parser("ablate", parents=[common], help="F1 under training-set contamination")
    a.add_argument("--dataset")
    e = sub.add_parser("export-dot", parents=[common], help="write Graphviz DOT for nets")
    e.add_argument("source", help="net.json file or dictionary directory")
    e.add_argument("--out")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export-dot":
            cmd_export_dot(args.source, args.out)
            return 0
        cfg = load_config(args.config, args.set, output_dir=args.output_dir, seed=args.seed, k=args.k,
                          miner=args.miner, noise_threshold=args.noise_threshold, n_sims=args.n_sims)
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "build":
            cmd_build(cfg, args.dataset)
        elif args.command == "diagnose":
            cmd_diagnose(cfg, args.dictionary, args.windows)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.dataset)
        elif args.command == "ablate":
            cmd_ablate(cfg, args.dataset)
    except (PmFaultError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
