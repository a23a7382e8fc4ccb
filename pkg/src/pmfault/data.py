"""Multivariate time series, windows, CSV ingestion and the synthetic benchmark.

Series are fixed-rate: sample ``i`` sits at timestep ``i`` and at time
``i / sampling_rate_hz`` seconds.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyFile,
    EmptyInput,
    EmptySeries,
    InvalidSpec,
    MissingColumn,
    NonNumericCell,
)

NORMAL = "normal"


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultivariateTimeSeries:
    values: np.ndarray  # (o, p)
    sampling_rate_hz: float
    feature_names: tuple[str, ...]
    series_id: str = "ts"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("values must be a 2-D array with at least one feature")
        if self.sampling_rate_hz <= 0:
            raise ValueError("sampling_rate_hz must be positive")
        names = tuple(self.feature_names)
        if len(names) != v.shape[1]:
            raise ValueError(f"{len(names)} feature names for {v.shape[1]} features")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "feature_names", names)

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def timesteps(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def duration_s(self) -> float:
        return len(self) / self.sampling_rate_hz

    def window(self, start: int, end: int, label: str = NORMAL) -> "TimeSeriesWindow":
        """Slice the inclusive range ``[start, end]`` into a window."""
        if not 0 <= start < end < len(self):
            raise ValueError(f"window [{start}, {end}] outside series of length {len(self)}")
        return TimeSeriesWindow(self.series_id, start, end, self.values[start:end + 1], label)


@dataclass(frozen=True, eq=False)
class TimeSeriesWindow:
    parent_id: str
    start: int
    end: int
    values: np.ndarray
    label: str = NORMAL

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("window start must precede end")
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.end - self.start + 1:
            raise ValueError(
                f"window [{self.start}, {self.end}] needs {self.end - self.start + 1} samples, got {v.shape[0]}"
            )
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self):
        return self.values.shape[0]

    @property
    def timesteps(self) -> np.ndarray:
        return np.arange(self.start, self.end + 1)

    @property
    def is_anomalous(self) -> bool:
        return self.label != NORMAL

    def relabel(self, label: str) -> "TimeSeriesWindow":
        return TimeSeriesWindow(self.parent_id, self.start, self.end, self.values, label)


def load_csv(path, feature_columns: Sequence[str], sampling_rate_hz: float,
             series_id: str | None = None) -> MultivariateTimeSeries:
    """Read the named numeric columns of a headed CSV file; row ``i`` becomes timestep ``i``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        idx = []
        for col in feature_columns:
            if col not in header:
                raise MissingColumn(col)
            idx.append(header.index(col))
        rows = []
        for r, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for col, j in zip(feature_columns, idx):
                cell = row[j].strip() if j < len(row) else ""
                try:
                    x = float(cell)
                except ValueError:
                    raise NonNumericCell(r, col, cell) from None
                if not math.isfinite(x):
                    raise NonNumericCell(r, col, cell)
                vals.append(x)
            rows.append(vals)
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    return MultivariateTimeSeries(np.array(rows), sampling_rate_hz, tuple(feature_columns),
                                  series_id or path.stem)


def normalize_minmax(ts: MultivariateTimeSeries) -> MultivariateTimeSeries:
    """Map every feature independently onto [0, 1]; constant features become 0."""
    if len(ts) == 0:
        raise EmptySeries("cannot normalize an empty series")
    v = ts.values
    lo = v.min(axis=0)
    span = v.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (v - lo) / safe, 0.0)
    return MultivariateTimeSeries(out, ts.sampling_rate_hz, ts.feature_names, ts.series_id)


def split_holdout(windows: Sequence[TimeSeriesWindow], train_fraction: float, seed):
    """Shuffle and split into ``(train, test)`` with ``round(train_fraction * n)`` training items."""
    if len(windows) == 0:
        raise EmptyInput("nothing to split")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(windows)
    n_train = int(math.floor(train_fraction * n + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    train = [windows[i] for i in sorted(order[:n_train])]
    test = [windows[i] for i in sorted(order[n_train:])]
    return train, test


# --------------------------------------------------------------------------
# synthetic benchmark

@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic two-fault robotic-arm benchmark.

    A normal cycle is pattern N1 (pick) followed by pattern N2 (move). A
    velocity cycle replaces N1 with a slower, damped copy; a weight cycle
    replaces N2 with a slower copy quantized into acceleration steps.
    """

    seed: int = 0
    n_normal_cycles: int = 60
    n_velocity_cycles: int = 60
    n_weight_cycles: int = 60
    n1_len: int = 50
    n2_len: int = 50
    noise_std: float = 0.05
    velocity_amplitude: float = 0.9
    velocity_stretch: float = 1.05
    weight_stretch: float = 1.05
    weight_steps: int = 4
    jitter: float = 0.08
    sampling_rate_hz: float = 10.0
    labels: tuple[str, str] = ("velocity", "weight")

    def validate(self):
        counts = (self.n_normal_cycles, self.n_velocity_cycles, self.n_weight_cycles)
        if any(int(c) != c or c <= 0 for c in counts):
            raise InvalidSpec(f"cycle counts must be positive integers, got {counts}")
        if self.n1_len < 4 or self.n2_len < 4:
            raise InvalidSpec("pattern lengths must be at least 4 samples")
        if self.noise_std < 0 or self.jitter < 0 or self.jitter >= 0.5:
            raise InvalidSpec("noise_std must be >= 0 and jitter in [0, 0.5)")
        if self.velocity_amplitude <= 0 or self.velocity_stretch <= 0 or self.weight_stretch <= 0:
            raise InvalidSpec("fault amplitude and stretch factors must be positive")
        if self.weight_steps < 2:
            raise InvalidSpec("weight_steps must be >= 2")
        if self.sampling_rate_hz <= 0:
            raise InvalidSpec("sampling_rate_hz must be positive")
        if len(set(self.labels)) != 2 or NORMAL in self.labels:
            raise InvalidSpec("fault labels must be two distinct non-'normal' strings")


def _pattern_n1(n, amp):
    u = np.linspace(0.0, 1.0, n)
    x = amp * np.sin(2 * np.pi * u) * np.sin(np.pi * u)
    y = 0.7 * amp * np.sin(np.pi * u) ** 2
    z = -0.5 * amp * np.sin(3 * np.pi * u) * np.sin(np.pi * u)
    return np.column_stack([x, y, z])


def _pattern_n2(n, amp):
    u = np.linspace(0.0, 1.0, n)
    x = -0.8 * amp * np.sin(np.pi * u) ** 3
    y = amp * np.sin(2 * np.pi * u) * np.sin(np.pi * u) ** 2
    z = 0.6 * amp * np.sin(np.pi * u) * np.cos(np.pi * u)
    return np.column_stack([x, y, z])


def _quantize(block, steps):
    # hold each channel on `steps` levels per sign -> staircase profile
    scale = np.abs(block).max(axis=0, keepdims=True)
    scale[scale == 0] = 1.0
    return np.round(block / scale * steps) / steps * scale


def synth_generate(spec: SynthSpec):
    """Generate the raw benchmark series and its ground-truth windows.

    Returns ``(series, windows)`` where every pattern instance is one window
    labeled ``"normal"`` or with one of ``spec.labels``. Values are raw
    (zero baseline); apply :func:`normalize_minmax` before discretizing.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    v_label, w_label = spec.labels
    kinds = ([NORMAL] * spec.n_normal_cycles + [v_label] * spec.n_velocity_cycles
             + [w_label] * spec.n_weight_cycles)
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]

    blocks, spans = [], []
    pos = 0
    for kind in kinds:
        for which in (1, 2):
            amp = 1.0 + rng.uniform(-spec.jitter, spec.jitter)
            stretch = 1.0 + rng.uniform(-spec.jitter, spec.jitter)
            label = NORMAL
            if which == 1:
                n = spec.n1_len * stretch
                if kind == v_label:
                    n *= spec.velocity_stretch
                    amp *= spec.velocity_amplitude
                    label = v_label
                block = _pattern_n1(max(4, int(round(n))), amp)
            else:
                n = spec.n2_len * stretch
                if kind == w_label:
                    n *= spec.weight_stretch
                    label = w_label
                block = _pattern_n2(max(4, int(round(n))), amp)
                if kind == w_label:
                    block = _quantize(block, spec.weight_steps)
            block = block + rng.normal(0.0, spec.noise_std, block.shape)
            blocks.append(block)
            spans.append((pos, pos + len(block) - 1, label))
            pos += len(block)

    series = MultivariateTimeSeries(np.vstack(blocks), spec.sampling_rate_hz, ("x_acc", "y_acc", "z_acc"),
                                    f"synth-{spec.seed}")
    windows = [series.window(s, e, lab) for s, e, lab in spans]
    return series, windows


def rewindow(series: MultivariateTimeSeries, windows: Sequence[TimeSeriesWindow]):
    """Re-slice ``windows`` from ``series`` (e.g. after normalization), keeping labels."""
    return [series.window(w.start, w.end, w.label) for w in windows]


def windows_by_label(windows, include_normal: bool = False) -> dict[str, list[TimeSeriesWindow]]:
    out: dict[str, list[TimeSeriesWindow]] = {}
    for w in windows:
        if w.label == NORMAL and not include_normal:
            continue
        out.setdefault(w.label, []).append(w)
    return dict(sorted(out.items()))


# --------------------------------------------------------------------------
# window exchange format: one sample per row, grouped by window_id

WINDOW_COLUMNS = ("window_id", "label", "timestep")


def windows_to_csv(windows: Sequence[TimeSeriesWindow], feature_names: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*WINDOW_COLUMNS, *feature_names])
    for win in windows:
        wid = f"{win.parent_id}:{win.start}"
        for t, row in zip(win.timesteps, win.values):
            w.writerow([wid, win.label, int(t), *(repr(float(x)) for x in row)])
    return buf.getvalue()


def read_windows_csv(path) -> tuple[list[TimeSeriesWindow], tuple[str, ...]]:
    """Inverse of :func:`windows_to_csv`; a header-only file yields no windows."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        for col in WINDOW_COLUMNS:
            if col not in header:
                raise MissingColumn(col)
        features = tuple(h for h in header if h not in WINDOW_COLUMNS)
        if not features:
            raise EmptyInput(f"{path} has no feature columns")
        fidx = [header.index(f) for f in features]
        iw, il, it = (header.index(c) for c in WINDOW_COLUMNS)
        groups: dict[str, tuple[str, list[int], list[list[float]]]] = {}
        for r, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            wid = row[iw]
            label, ts, vals = groups.setdefault(wid, (row[il], [], []))
            try:
                ts.append(int(row[it]))
            except ValueError:
                raise NonNumericCell(r, "timestep", row[it]) from None
            sample = []
            for f, j in zip(features, fidx):
                try:
                    sample.append(float(row[j]))
                except (ValueError, IndexError):
                    raise NonNumericCell(r, f, row[j] if j < len(row) else "") from None
            vals.append(sample)
    out = []
    for wid, (label, ts, vals) in groups.items():
        parent = wid.rsplit(":", 1)[0]
        if ts != list(range(ts[0], ts[0] + len(ts))):
            raise ValueError(f"window {wid!r} has non-contiguous timesteps")
        out.append(TimeSeriesWindow(parent, ts[0], ts[-1], np.array(vals), label))
    return out, features


def read_spans_csv(path) -> list[tuple[int, int, str]]:
    """Read ``start,end,label`` rows describing ground-truth windows of a series."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFile(f"{path} is empty")
        for col in ("start", "end", "label"):
            if col not in reader.fieldnames:
                raise MissingColumn(col)
        return [(int(r["start"]), int(r["end"]), r["label"].strip()) for r in reader]
