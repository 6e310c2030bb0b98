"""Print the concrete parameter schedules for each convergence criterion.

Every order term from the guarantees becomes c * g(eps) with c = 1 by
default; this shows what the solver actually receives at a few accuracy
targets, including the stage-wise schedules for convex and strongly
convex objectives.
"""

from pmvr import schedule_for

print("single-run schedules")
print(f"{'criterion':>22} {'mode':>9} {'eps':>6} {'eta':>9} {'alpha':>9} "
      f"{'B0':>5} {'B1':>5} {'T':>7} {'N':>5}")
for criterion, mode in [
    ("fw_gap", "constant"), ("fw_gap", "large"),
    ("grad_map", "constant"), ("grad_map", "large"),
]:
    for eps in (0.2, 0.1, 0.05):
        p = schedule_for(criterion, mode, eps)
        n = p.subsolver.inner_iters if p.subsolver else "-"
        print(f"{criterion:>22} {mode:>9} {eps:>6} {p.eta:>9.4f} {p.alpha:>9.4f} "
              f"{p.b0:>5} {p.b1:>5} {p.iters:>7} {n:>5}")

print("\nstage-wise schedule: strongly convex criterion, modulus 2, eps = 1/64")
sched = schedule_for("strongly_convex_gap", "constant", 1 / 64, strong_convexity=2.0)
print(f"{'stage':>6} {'target':>9} {'eta':>9} {'alpha':>9} {'B1':>5} {'T':>6} {'N':>5}")
for s, (params, target) in enumerate(zip(sched.stages, sched.targets), start=1):
    print(f"{s:>6} {target:>9.4f} {params.eta:>9.4f} {params.alpha:>9.4f} "
          f"{params.b1:>5} {params.iters:>6} {params.subsolver.inner_iters:>5}")
print("\neach stage halves its accuracy target, shrinking the step size and")
print("momentum while the iterate and both trackers carry over warm.")
