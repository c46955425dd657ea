# How much can an l-infinity error of size eps in g hurt each design?
import numpy as np

from berndesign import (
    Hybrid,
    PerturbationSpec,
    Stratified,
    TwoCluster,
    build_hybrid,
    build_matched_pairs,
    inflation_scaling_experiment,
    solve_knapsack,
    worst_case_perturbation,
)
from berndesign.robustness import loglog_slope, symmetric_index

eps = 0.01
h = symmetric_index(256)
for kind, design in [
    ("two_cluster", TwoCluster(solve_knapsack(h))),
    ("hybrid", Hybrid(build_hybrid(h, 0.5))),
    ("stratified", Stratified(build_matched_pairs(h))),
]:
    _, before, after = worst_case_perturbation(h, PerturbationSpec(eps, kind), design)
    print(f"{kind:>12}: {before:.3e} -> {after:.3e}")

grid = [64, 128, 256, 512, 1024, 2048, 4096]
recs = inflation_scaling_experiment(grid, 0.5, eps, "symmetric", seed=1)
for kind in ("two_cluster", "hybrid", "stratified"):
    infl = [r["inflation"] for r in recs if r["design"] == kind]
    print(f"{kind:>12}: inflation grows like n^{loglog_slope(grid, infl):.2f}")
