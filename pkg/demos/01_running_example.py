"""
A small workflow net, aligned and simulated
===========================================

Build a net by hand, score a noisy trace against it, then attach
duration histograms and let the simulator play it out.
"""
import numpy as np

from pmfault.conformance import align, fitness, worst_alignment_cost
from pmfault.petri import TAU, NetBuilder, check_soundness, export_dot, replay
from pmfault.stochastic import build_histogram, enhance, simulate_trace

# %% the net: tr1 forks three branches, two of which can loop back silently
b = NetBuilder("example")
src, snk = b.place("source"), b.place("sink")
p = {i: b.place(f"p{i}") for i in range(1, 8)}
t = {i: b.transition(f"tr{i}", f"tr{i}") for i in range(1, 7)}
tau1, tau2 = b.transition(TAU, "tau1"), b.transition(TAU, "tau2")
for x, y in [(src, t[1]), (t[1], p[1]), (t[1], p[3]), (t[1], p[5]),
             (p[1], t[2]), (t[2], p[2]), (p[2], tau1), (tau1, p[1]),
             (p[3], t[3]), (t[3], p[4]),
             (p[5], t[4]), (t[4], p[6]), (p[6], t[5]), (t[5], p[7]), (p[7], tau2), (tau2, p[5]),
             (p[2], t[6]), (p[4], t[6]), (p[7], t[6]), (t[6], snk)]:
    b.arc(x, y)
net = b.build({src: 1}, {snk: 1})
print(check_soundness(net))
print(export_dot(net)[:200], "...")

# %% alignment of a trace with misplaced and repeated events
trace = ("tr3", "tr1", "tr2", "tr2", "tr3", "tr5", "tr4", "tr4", "tr6")
al = align(trace, net)
print("optimal cost", al.cost, "worst", worst_alignment_cost(trace, net))
print("fitness %.4f" % fitness(trace, net, alignment=al))
for log_move, model_move in al.moves:
    print(f"  {log_move:>4} | {model_move}")

# %% durations: every visible transition gets a histogram
rng = np.random.default_rng(7)
times = {i: rng.gamma(2.0, 2.0 + i, size=200) for i in range(1, 7)}
spn = enhance(net, times, {f"tr{i}": i for i in range(1, 7)}, bins=10)
h = spn.dist["tr2"]
print("tr2 bins:", np.round(h.bin_edges, 1))
print("tr2 probs:", np.round(h.probs, 3))

# %% a few simulated runs; every one replays to the final marking
for seed in range(5):
    run = simulate_trace(spn, seed, max_events=50)
    assert replay(net, run.firings) == net.final_marking
    print(" ".join(run.labels), " total %.1fs" % sum(run.durations))
