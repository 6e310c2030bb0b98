"""Variance reduction in action: recursive trackers vs plain mini-batches.

Runs the solver on a noisy two-level quadratic with a slowly moving
iterate and compares the time-averaged gradient-tracking error of the
recursive estimator (small momentum) against plain per-step mini-batch
estimates (momentum 1).
"""

import numpy as np

from pmvr import RandomSource, Simplex, SolverParams, TraceConfig, pmvr_run
from pmvr.benchmarks import two_level_tracking_problem

fset = Simplex(5)
x1 = np.full(5, 0.2)
seeds = range(10)

print("time-averaged ||v_t - grad F(x_t)||^2 over t in [100, 1000], 10 seeds\n")
print(f"{'momentum':>10} {'tracking error':>16}")
for alpha in (0.05, 0.1, 0.3, 1.0):
    acc = 0.0
    for seed in seeds:
        problem = two_level_tracking_problem(data_seed=0)
        params = SolverParams(eta=0.01, alpha=alpha, b0=8, b1=1, iters=1000)
        res = pmvr_run(
            problem, fset, params, x1, RandomSource(1000 + seed),
            trace=TraceConfig(collect_tau=False, keep_iterates=False,
                              track_gradient_error=True, metric_every=1000),
        )
        acc += float(res.gradient_errors[99:].mean())
    print(f"{alpha:>10.2f} {acc / len(list(seeds)):>16.4f}")

print("\nsmall momentum reuses correlated samples across steps and tracks the")
print("moving gradient far more tightly than independent mini-batches.")
