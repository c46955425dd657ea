"""Data-generating processes and the Monte Carlo engine.

The studies condition on covariates: one population is drawn per
``(dgp, n, seed)`` and reused across replicates, which only redraw the
assignment and the outcome noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .core import IID, Hybrid, OracleVector, PreconditionError, Stratified, TwoCluster, as_oracle
from .designs import CHUNK, sample_assignments
from .estimation import _paired_terms, build_pi, conditional_variance, confidence_interval, ipw_estimate
from .solvers import (
    DEFAULT_CONFIG,
    SolverConfig,
    build_hybrid,
    build_matched_pairs,
    solve_balanced,
    solve_knapsack,
)

DGP_IDS = ("main", "appx_uniform", "appx_gauss_cubic", "appx_poisson")
MAIN_COV = np.array([[10.0, 5.0], [5.0, 10.0]])

FIG1_DESIGNS = ("bern", "hybrid_bern", "sib", "hybrid_sib", "stratified")
PERTURB_DESIGNS = ("bern", "hybrid_bern", "stratified")
FIG1_N = {"desk": (50, 100, 250), "full": (50, 100, 150, 200, 250, 500, 750, 1000)}
FIG2_N = (50, 250, 1000)
FIG2_SIGMA2 = (25.0, 100.0, 400.0)
SCALES = {
    # (replicates, perturbations, replicates per perturbation)
    "desk": (10_000, 20, 500),
    "full": (10_000, 100, 1_000),
}


@dataclass(frozen=True)
class DGPSpec:
    id: str = "main"
    sigma_y: float = 1.0

    def __post_init__(self):
        if self.id not in DGP_IDS:
            raise PreconditionError(f"unknown dgp {self.id!r}; expected one of {DGP_IDS}")
        if not self.sigma_y > 0:
            raise PreconditionError(f"sigma_y must be > 0, got {self.sigma_y}")


@dataclass(frozen=True, eq=False)
class Population:
    x: np.ndarray
    mu1: np.ndarray
    mu0: np.ndarray
    g: OracleVector
    s1: np.ndarray
    s0: np.ndarray
    tau_n: float

    @property
    def n(self) -> int:
        return self.g.n


@dataclass(frozen=True)
class ProxySpec:
    kind: str = "exact"
    sigma_g2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exact", "gaussian_perturb", "mu0_proxy"):
            raise PreconditionError(f"unknown proxy kind {self.kind!r}")
        if not self.sigma_g2 >= 0:
            raise PreconditionError(f"sigma_g2 must be >= 0, got {self.sigma_g2}")


@dataclass
class SimResult:
    design_kind: str
    n: int
    replicates: int
    sample_variance: float
    mean_estimate: float
    closed_form_variance: float
    variance_se: float
    coverage: Optional[float] = None
    median_nu2: Optional[float] = None


def conditional_means(dgp: DGPSpec, x: np.ndarray):
    """``(mu1, mu0)`` at covariates ``x`` (rows are units)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if dgp.id == "main":
        bump = np.abs(x[:, 1]) ** 1.5
        return x[:, 0] ** 2 - 3.0 * bump, -2.0 * bump
    t = x[:, 0]
    if dgp.id == "appx_uniform":
        return t + 0.05 * t**1.05, t
    if dgp.id == "appx_gauss_cubic":
        return 1.2 * t**3, t**3
    return t**2 + 0.2 * t**3, t**2


def draw_covariates(dgp: DGPSpec, n: int, gen: np.random.Generator) -> np.ndarray:
    if dgp.id == "main":
        chol = np.linalg.cholesky(MAIN_COV)
        return gen.standard_normal((n, 2)) @ chol.T
    if dgp.id == "appx_uniform":
        return gen.random((n, 1))
    if dgp.id == "appx_gauss_cubic":
        return gen.standard_normal((n, 1))
    return gen.poisson(20.0, size=(n, 1)).astype(float)


def population_from_covariates(dgp: DGPSpec, x) -> Population:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    mu1, mu0 = conditional_means(dgp, x)
    var = np.full(mu1.size, dgp.sigma_y**2)
    return Population(x, mu1, mu0, OracleVector(mu1 + mu0), var, var.copy(), float(np.mean(mu1 - mu0)))


def generate_population(dgp: DGPSpec, n: int, seed: int) -> Population:
    """Covariates and conditional moments for ``n`` units (keyed by seed, dgp, n)."""
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    gen = rng.stream(seed, "population", dgp.id, n)
    return population_from_covariates(dgp, draw_covariates(dgp, n, gen))


def population_ate(dgp: DGPSpec) -> float:
    """Population average effect ``E[mu1(X) - mu0(X)]`` in closed form."""
    if dgp.id == "main":
        sd = math.sqrt(MAIN_COV[1, 1])
        abs_moment = sd**1.5 * 2**0.75 * math.gamma(1.25) / math.sqrt(math.pi)
        return MAIN_COV[0, 0] - abs_moment
    if dgp.id == "appx_uniform":
        return 0.05 / 2.05
    if dgp.id == "appx_gauss_cubic":
        return 0.0
    lam = 20.0
    return 0.2 * (lam**3 + 3 * lam**2 + lam)


def make_proxy(pop: Population, proxy: ProxySpec, seed: int, stream_id: int = 0) -> OracleVector:
    """The index vector the design is built from."""
    if proxy.kind == "exact":
        return pop.g
    if proxy.kind == "mu0_proxy":
        return OracleVector(pop.mu0)
    gen = rng.stream(seed, "proxy", proxy.sigma_g2, stream_id)
    noise = gen.standard_normal(pop.n) * math.sqrt(proxy.sigma_g2)
    return OracleVector(pop.g.values + noise)


def build_design(kind: str, h, alpha: float = 0.5, cfg: SolverConfig = DEFAULT_CONFIG):
    """Design named ``kind`` built from the index vector ``h``."""
    h = as_oracle(h)
    if kind == "iid":
        return IID(h.n)
    if kind == "bern":
        return TwoCluster(solve_knapsack(h, cfg))
    if kind == "sib":
        return TwoCluster(solve_balanced(h, cfg))
    if kind == "stratified":
        return Stratified(build_matched_pairs(h))
    if kind == "hybrid_bern":
        return Hybrid(build_hybrid(h, alpha, "knapsack", cfg))
    if kind == "hybrid_sib":
        return Hybrid(build_hybrid(h, alpha, "balanced", cfg))
    raise PreconditionError(f"unknown design {kind!r}")


def _replicate_seed(seed: int, *tags) -> int:
    return int(rng.stream(seed, *tags).integers(0, 2**63))


def simulate_estimates(pop: Population, design, replicates: int, seed: int, tag: str):
    """``(tau_hat, y)`` per replicate; ``y`` is yielded chunk by chunk."""
    sd = np.sqrt(pop.s1)
    z_all = sample_assignments(design, _replicate_seed(seed, "rep", tag), replicates)
    for c, start in enumerate(range(0, replicates, CHUNK)):
        z = z_all[start : start + CHUNK]
        noise = rng.stream(seed, "noise", tag, c).standard_normal((z.shape[0], pop.n))
        y = np.where(z == 1, pop.mu1, pop.mu0) + sd * noise
        yield ipw_estimate(y, z), y


def sample_variance_se(x: np.ndarray) -> float:
    """Standard error of the unbiased sample variance via the fourth moment."""
    r = x.size
    dev = x - x.mean()
    m2 = np.mean(dev**2)
    m4 = np.mean(dev**4)
    return math.sqrt(max(m4 - m2**2 * (r - 3) / (r - 1), 0.0) / r)


def _ci_ready(design) -> bool:
    return isinstance(design, TwoCluster) and design.partition.balanced and design.n % 4 == 0


def run_monte_carlo(
    dgp: DGPSpec,
    n: int,
    designs,
    proxy: ProxySpec = ProxySpec(),
    replicates: int = 10_000,
    seed: int = rng.DEFAULT_SEED,
    compute_ci: bool = False,
    *,
    alpha: float = 0.5,
    level: float = 0.95,
    cfg: SolverConfig = DEFAULT_CONFIG,
    population: Optional[Population] = None,
    proxy_stream: int = 0,
) -> list:
    """Sample variance of the IPW estimate for each design on one population.

    ``designs`` holds design names (see :func:`build_design`) or callables
    mapping the proxy vector to a design. Coverage is reported against
    ``tau_n`` for balanced two-cluster designs with ``n % 4 == 0``.
    """
    if replicates < 2:
        raise PreconditionError(f"replicates must be >= 2, got {replicates}")
    pop = population if population is not None else generate_population(dgp, n, seed)
    h = make_proxy(pop, proxy, seed, proxy_stream)
    results = []
    for name in designs:
        label = name if isinstance(name, str) else getattr(name, "__name__", "custom")
        design = build_design(name, h, alpha, cfg) if isinstance(name, str) else name(h)
        want_ci = compute_ci and _ci_ready(design)
        pi = build_pi(design.partition, h) if want_ci else None
        taus, covered, nu2s = [], 0, []
        for tau, y in simulate_estimates(pop, design, replicates, seed, label):
            taus.append(tau)
            if want_ci:
                a2, cross, adjacent = _paired_terms(y, pi)
                nu2 = 2.0 * a2 - (adjacent - cross + tau**2)
                lo, hi = confidence_interval(tau, nu2, pop.n, level)
                covered += int(np.sum((lo <= pop.tau_n) & (pop.tau_n <= hi)))
                nu2s.append(nu2)
        taus = np.concatenate(taus)
        results.append(
            SimResult(
                design_kind=label,
                n=pop.n,
                replicates=replicates,
                sample_variance=float(np.var(taus, ddof=1)),
                mean_estimate=float(np.mean(taus)),
                closed_form_variance=conditional_variance(pop.g, pop.s1, pop.s0, design),
                variance_se=sample_variance_se(taus),
                coverage=covered / replicates if want_ci else None,
                median_nu2=float(np.median(np.concatenate(nu2s))) if want_ci else None,
            )
        )
    return results


@dataclass
class CLTResult:
    n: int
    replicates: int
    tau: float
    coverage: float
    median_nu2: float
    tau_hats: np.ndarray = field(repr=False)
    nu2s: np.ndarray = field(repr=False)


def run_clt_study(
    dgp: DGPSpec,
    n: int,
    replicates: int,
    seed: int = rng.DEFAULT_SEED,
    level: float = 0.95,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CLTResult:
    """Coverage of the population effect with covariates redrawn per replicate.

    Each replicate draws a fresh population, builds the balanced two-cluster
    design from the exact ``g``, draws one assignment and outcome vector,
    and forms the paired-variance confidence interval.
    """
    if n % 4:
        raise PreconditionError(f"the CLT study needs n divisible by 4, got n={n}")
    tau = population_ate(dgp)
    taus = np.empty(replicates)
    nu2s = np.empty(replicates)
    hits = 0
    for r in range(replicates):
        pop = generate_population(dgp, n, _replicate_seed(seed, "clt-pop", r))
        design = TwoCluster(solve_balanced(pop.g, cfg))
        (tau_hat, y), = simulate_estimates(pop, design, 1, _replicate_seed(seed, "clt-rep", r), "sib")
        a2, cross, adjacent = _paired_terms(y[0], build_pi(design.partition, pop.g))
        nu2 = 2.0 * a2 - (adjacent - cross + tau_hat[0] ** 2)
        lo, hi = confidence_interval(tau_hat[0], nu2, n, level)
        hits += int(lo <= tau <= hi)
        taus[r], nu2s[r] = tau_hat[0], nu2
    return CLTResult(n, replicates, tau, hits / replicates, float(np.median(nu2s)), taus, nu2s)


def nu2_truth(dgp: DGPSpec, draws: int = 1_000_000, seed: int = rng.DEFAULT_SEED) -> float:
    """Monte Carlo value of the asymptotic variance ``4 sigma_y^2 + Var(tau(X))``."""
    x = draw_covariates(dgp, draws, rng.stream(seed, "nu2-truth", dgp.id))
    mu1, mu0 = conditional_means(dgp, x)
    return 4.0 * dgp.sigma_y**2 + float(np.var(mu1 - mu0))


# --- figure protocols ---------------------------------------------------------

CSV_FIELDS = ("setting", "n", "design", "perturbation_id", "sample_variance", "closed_form_variance")


def _rows(setting, results, perturbation_id=0):
    return [
        {
            "setting": setting,
            "n": r.n,
            "design": r.design_kind,
            "perturbation_id": perturbation_id,
            "sample_variance": r.sample_variance,
            "closed_form_variance": r.closed_form_variance,
        }
        for r in results
    ]


def reproduce_figure(figure: str, scale: str = "desk", seed: int = rng.DEFAULT_SEED, cfg: SolverConfig = DEFAULT_CONFIG) -> list:
    """Long-format rows for the named figure protocol."""
    if scale not in SCALES:
        raise PreconditionError(f"scale must be one of {tuple(SCALES)}, got {scale!r}")
    reps, n_perturb, perturb_reps = SCALES[scale]
    rows = []
    if figure == "fig1":
        for n in FIG1_N[scale]:
            rows += _rows("main", run_monte_carlo(DGPSpec("main"), n, FIG1_DESIGNS, ProxySpec(), reps, seed, cfg=cfg))
    elif figure == "fig2_3":
        for sigma2 in FIG2_SIGMA2:
            setting = f"main_sigma2_{sigma2:g}"
            for n in FIG2_N:
                pop = generate_population(DGPSpec("main"), n, seed)
                for p in range(n_perturb):
                    res = run_monte_carlo(
                        DGPSpec("main"), n, PERTURB_DESIGNS, ProxySpec("gaussian_perturb", sigma2),
                        perturb_reps, seed, cfg=cfg, population=pop, proxy_stream=p,
                    )
                    rows += _rows(setting, res, p)
    elif figure in ("appxB", "appxB_proxy"):
        proxy = ProxySpec("mu0_proxy") if figure == "appxB_proxy" else ProxySpec()
        for dgp_id in DGP_IDS[1:]:
            for n in FIG1_N[scale]:
                res = run_monte_carlo(DGPSpec(dgp_id), n, FIG1_DESIGNS, proxy, reps, seed, cfg=cfg)
                rows += _rows(dgp_id, res)
    else:
        raise PreconditionError(f"unknown figure {figure!r}")
    return rows
