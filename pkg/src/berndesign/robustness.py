"""Worst-case sensitivity of each design to an l-infinity error in the oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Hybrid, OracleVector, PreconditionError, Stratified, TwoCluster, as_oracle
from .designs import quadratic_form
from .solvers import DEFAULT_CONFIG, SolverConfig, build_hybrid, build_matched_pairs, solve_knapsack

DESIGN_KINDS = {"two_cluster": TwoCluster, "stratified": Stratified, "hybrid": Hybrid}


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float
    design_kind: str

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise PreconditionError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.design_kind not in DESIGN_KINDS:
            raise PreconditionError(f"unknown design kind {self.design_kind!r}")


def _push_apart(g: np.ndarray, hv: np.ndarray, partition, eps: float) -> None:
    """Raise the larger-sum side by ``eps`` and lower the other (ties: raise S^c)."""
    larger_is_s = partition.recompute_diff(hv) > 0
    up, down = (partition.s, partition.complement) if larger_is_s else (partition.complement, partition.s)
    g[list(up)] += eps
    g[list(down)] -= eps


def worst_case_perturbation(h, spec: PerturbationSpec, design):
    """Perturbed ``g`` inside the eps-ball that maximises ``g' Cov(Z) g``.

    Returns ``(g, qf_before, qf_after)`` where both quadratic forms are
    evaluated for ``design``. The closed forms are:

    * two-cluster: ``(|D| + n*eps)**2 / 4``
    * stratified: ``qf_before + (n/2) eps**2 + eps * sum(pair gaps)``
    * hybrid: the two-cluster form summed over groups
    """
    hv = as_oracle(h).values
    expected = DESIGN_KINDS[spec.design_kind]
    if not isinstance(design, expected):
        raise PreconditionError(
            f"design kind {spec.design_kind!r} does not match a {type(design).__name__} design"
        )
    if hv.size != design.n:
        raise PreconditionError(f"h has {hv.size} entries, design has n={design.n}")
    eps = float(spec.epsilon)
    g = hv.copy()
    if isinstance(design, TwoCluster):
        _push_apart(g, hv, design.partition, eps)
    elif isinstance(design, Hybrid):
        for grp in design.grouping.groups:
            _push_apart(g, hv, grp, eps)
    else:
        for a, b in design.pairs.pairs:
            lo, hi = (a, b) if hv[a] <= hv[b] else (b, a)
            g[hi] += eps
            g[lo] -= eps
    return OracleVector(g), quadratic_form(hv, design), quadratic_form(g, design)


def closed_form_after(h, spec: PerturbationSpec, design) -> float:
    """The worst-case quadratic form from the closed forms alone."""
    hv = as_oracle(h).values
    eps = float(spec.epsilon)
    if isinstance(design, TwoCluster):
        p = design.partition
        return 0.25 * (abs(p.recompute_diff(hv)) + p.n * eps) ** 2
    if isinstance(design, Hybrid):
        return sum(0.25 * (abs(grp.recompute_diff(hv)) + grp.n * eps) ** 2 for grp in design.grouping.groups)
    gaps = np.array([abs(hv[b] - hv[a]) for a, b in design.pairs.pairs])
    before = 0.25 * float(np.sum(gaps**2))
    return before + design.n / 2 * eps**2 + eps * float(np.sum(gaps))


def symmetric_index(n: int) -> np.ndarray:
    """Evenly spaced values symmetric about zero."""
    return np.linspace(-1.0, 1.0, n)


def inflation_scaling_experiment(
    n_grid,
    alpha: float,
    epsilon: float,
    dgp_id: str,
    seed: int,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> list:
    """Records ``(n, design, qf_before, qf_after, inflation)`` across ``n_grid``.

    ``dgp_id`` names a simulation DGP whose ``g`` serves as ``h``, or
    ``"symmetric"`` for an evenly spaced ``h`` whose groups split almost
    perfectly (isolating the ``n**2 / G`` scaling).
    """
    from .sim import DGPSpec, generate_population

    records = []
    for n in n_grid:
        n = int(n)
        if n % 2:
            raise PreconditionError(f"n-grid entries must be even, got {n}")
        if dgp_id == "symmetric":
            h = symmetric_index(n)
        else:
            h = generate_population(DGPSpec(dgp_id), n, seed).g.values
        designs = {
            "two_cluster": TwoCluster(solve_knapsack(h, cfg)),
            "stratified": Stratified(build_matched_pairs(h)),
            "hybrid": Hybrid(build_hybrid(h, alpha, "knapsack", cfg)),
        }
        for kind, design in designs.items():
            _, before, after = worst_case_perturbation(h, PerturbationSpec(epsilon, kind), design)
            records.append(
                {"n": n, "design": kind, "qf_before": before, "qf_after": after, "inflation": after - before}
            )
    return records


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` on ``log(ns)``."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
