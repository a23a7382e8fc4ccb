"""
Offline dictionary, online identification
=========================================

Generate the synthetic two-fault arm data, learn one stochastic net per
fault, and classify held-out anomaly windows.
"""
import numpy as np

from pmfault.data import NORMAL, SynthSpec, normalize_minmax, rewindow, split_holdout, synth_generate, windows_by_label
from pmfault.diagnosis import DictionaryConfig, build_dictionary, evaluate, identify

ts, windows = synth_generate(SynthSpec(seed=1))
ts = normalize_minmax(ts)
windows = rewindow(ts, windows)
by_label = windows_by_label(windows)
print(ts.feature_names, ts.values.shape, {l: len(w) for l, w in by_label.items()})
print("normal windows:", sum(w.label == NORMAL for w in windows))

train, test = {}, {}
for i, label in enumerate(sorted(by_label)):
    train[label], test[label] = split_holdout(by_label[label], 2 / 3, i)

# %% offline part
cfg = DictionaryConfig(k=5, miner="imf", n_sims=100)
dictionary = build_dictionary(train, cfg, ts.sampling_rate_hz)
for e in dictionary:
    print(f"{e.fault_label:>9}: {e.soundness}  S_arc={e.s_arc:.3f}  |P|+|Tr|={e.net.size}  pool={len(e.sim_pool)}")

# %% one window, scored against every fault
w = test["weight"][0]
res = identify(w, dictionary, ts.sampling_rate_hz)
for label, s in zip(res.labels, res.scores):
    print(f"{label:>9}: fitness={s.fitness:.3f} rmse={s.best_rmse:.3f} r2={s.best_r2:.3f} trace={s.trace_length}")
print("votes", res.vote_indices, "->", res.fault_label)

# %% all test windows
report = evaluate(dictionary, test, ts.sampling_rate_hz)
print(report.to_csv())
print("macro F1 %.3f, median conformance time %.2f ms" % (report.macro_f1, 1e3 * report.median_cc_time_s))
