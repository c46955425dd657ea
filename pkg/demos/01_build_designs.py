# Building each design from an index vector g and looking at what it randomizes.
import numpy as np

from berndesign import (
    Hybrid,
    Stratified,
    TwoCluster,
    build_hybrid,
    build_matched_pairs,
    mixture_representation,
    quadratic_form,
    sample_assignments,
    solve_balanced,
    solve_knapsack,
)

g = np.array([1.0, 1.0, 1.0, 3.0])

# one coin for everybody: S gets treatment on heads, S^c on tails
bern = TwoCluster(solve_knapsack(g))
print("knapsack S (0-based):", bern.partition.s, "diff:", bern.partition.diff)
for v, w in mixture_representation(bern):
    print("  ", v, w)

# the same idea with |S| = n/2
sib = TwoCluster(solve_balanced(g))
print("balanced S:", sib.partition.s, "diff:", sib.partition.diff)

# matched pairs: sort, pair neighbours, flip one coin per pair
strat = Stratified(build_matched_pairs(g))
print("pairs:", strat.pairs.pairs)

# design-dependent part of the variance is g' Cov(Z) g
for name, d in [("bern", bern), ("sib", sib), ("stratified", strat)]:
    print(f"{name:>10}: g'Cov(Z)g = {quadratic_form(g, d):g}")

# a larger problem, with the hybrid in between
rng = np.random.default_rng(0)
g = rng.normal(0, 3, 50)
designs = {
    "bern": TwoCluster(solve_knapsack(g)),
    "hybrid": Hybrid(build_hybrid(g, 0.5)),
    "stratified": Stratified(build_matched_pairs(g)),
}
for name, d in designs.items():
    print(f"{name:>10}: {quadratic_form(g, d):.3e}")
print("hybrid group sizes:", [p.n for p in designs["hybrid"].grouping.groups])

z = sample_assignments(designs["hybrid"], seed=1, reps=4)
print(z[:, :12])
print("treated per row:", z.sum(axis=1))
