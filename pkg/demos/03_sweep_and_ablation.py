"""
K x miner sweep and detector-accuracy ablation
==============================================

A reduced version of the factorial experiment; the CLI's ``sweep`` and
``ablate`` commands run the full grid from a config file.
"""
from pmfault.data import NORMAL, SynthSpec, normalize_minmax, rewindow, split_holdout, synth_generate, windows_by_label
from pmfault.detection import LabeledWindowPool
from pmfault.diagnosis import DictionaryConfig, ablate_accuracy, sweep, sweep_to_csv

ts, windows = synth_generate(SynthSpec())
ts = normalize_minmax(ts)
windows = rewindow(ts, windows)
by_label = windows_by_label(windows)
normal = [w for w in windows if w.label == NORMAL]
train, test = {}, {}
for i, label in enumerate(sorted(by_label)):
    train[label], test[label] = split_holdout(by_label[label], 2 / 3, i)

cfg = DictionaryConfig(n_sims=60)
rows = sweep(train, test, ks=[2, 4, 6], miners=["imf", "hm"], cfg=cfg, rate_hz=ts.sampling_rate_hz, repetitions=2)
print(sweep_to_csv(rows))

# %% contaminate the training sets with normal windows
pools = {l: LabeledWindowPool(tuple(by_label[l]), tuple(normal)) for l in by_label}
for row in ablate_accuracy(pools, [1.0, 0.75, 0.5], cfg, ts.sampling_rate_hz, repetitions=2):
    per = "  ".join(f"{l}={f:.3f}" for l, f in row.per_fault_mean.items())
    print(f"Acc={row.acc:.2f}  F1={row.f1_mean:.3f}±{row.f1_std:.3f}  {per}")
