"""IPW estimation, exact conditional variance and the paired variance estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .core import Partition, PreconditionError, as_oracle
from .designs import quadratic_form

CI_FLOOR = 1e-12


@dataclass(frozen=True)
class EstimateRecord:
    tau_hat: float
    a2: float
    b2: float
    nu2: float
    ci_low: float
    ci_high: float
    level: float
    pi: tuple  # 0-based unit order


@dataclass(frozen=True)
class DiagnosticsRecord:
    var_gap_1: float
    var_gap_0: float
    g_gap: float
    pair_gap_1: float
    pair_gap_0: float
    adj_gap_1: float
    adj_gap_0: float


def _vec(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        raise PreconditionError(f"{name} must be a vector")
    return arr


def _same_length(*named):
    sizes = {name: arr.shape[-1] for name, arr in named}
    if len(set(sizes.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in sizes.items())
        raise PreconditionError(f"length mismatch: {detail}")


def ipw_estimate(y, z):
    """``(2/n) sum(y*z - y*(1-z))``; broadcasts over leading replicate axes."""
    y = _vec(y, "y")
    z = _vec(getattr(z, "z", z), "z")
    _same_length(("y", y), ("z", z))
    n = y.shape[-1]
    return (2.0 / n) * np.sum(y * (2.0 * z - 1.0), axis=-1)


def conditional_variance(g, s1, s0, design) -> float:
    """Exact ``Var(tau_hat | X)``: noise term plus ``(4/n^2) g' Cov(Z) g``."""
    values = as_oracle(g).values
    s1, s0 = _vec(s1, "s1"), _vec(s0, "s0")
    _same_length(("g", values), ("s1", s1), ("s0", s0))
    if (s1 < 0).any() or (s0 < 0).any():
        raise PreconditionError("conditional variances must be nonnegative")
    n = values.size
    noise = 2.0 / n**2 * math.fsum(s1 + s0)
    return noise + 4.0 / n**2 * quadratic_form(values, design)


def ex_post_mean(mu1, mu0, z) -> float:
    """``E[tau_hat | X, Z=z] = (2/n)(sum_{z=1} mu1 - sum_{z=0} mu0)``."""
    mu1, mu0 = _vec(mu1, "mu1"), _vec(mu0, "mu0")
    z = _vec(getattr(z, "z", z), "z")
    _same_length(("mu1", mu1), ("mu0", mu0), ("z", z))
    n = mu1.size
    return 2.0 / n * math.fsum(np.where(z == 1, mu1, -mu0))


def _require_balanced(partition: Partition):
    if not partition.balanced:
        raise PreconditionError(
            f"partition must be balanced (|S| = n/2), got |S|={len(partition.s)} with n={partition.n}"
        )


def build_pi(partition: Partition, h) -> np.ndarray:
    """Unit order: ``S`` sorted by ``h``, then ``S^c`` sorted by ``h`` (ties by index)."""
    _require_balanced(partition)
    hv = as_oracle(h).values
    if hv.size != partition.n:
        raise PreconditionError(f"h has {hv.size} entries, partition has n={partition.n}")
    halves = []
    for side in (partition.s, partition.complement):
        side = np.asarray(side, dtype=np.int64)
        halves.append(side[np.argsort(hv[side], kind="stable")])
    return np.concatenate(halves)


def _paired_terms(y, pi):
    """(a2, cross, adjacent) on the trailing axis of ``y``."""
    n = pi.size
    half = n // 2
    yp = y[..., pi]
    first, second = yp[..., :half], yp[..., half:]
    a2 = 2.0 / n * np.sum((first - second) ** 2, axis=-1)
    cross = 4.0 / n * np.sum(first * second, axis=-1)
    adjacent = 4.0 / n * np.sum(yp[..., 1::2] * yp[..., 0::2], axis=-1)
    return a2, cross, adjacent


def _require_mod4(n: int):
    if n % 4:
        raise PreconditionError(
            f"the paired variance estimator needs n divisible by 4, got n={n}"
        )


def variance_estimator(y, z, partition: Partition, h):
    """``(a2, b2, nu2)`` with ``nu2 = 2*a2 - (b2 + tau_hat**2)``.

    ``nu2`` is returned as computed and may be negative in small samples.
    """
    y = _vec(y, "y")
    _require_mod4(y.shape[-1])
    pi = build_pi(partition, h)
    _same_length(("y", y), ("partition", pi))
    a2, cross, adjacent = _paired_terms(y, pi)
    b2 = adjacent - cross
    tau = ipw_estimate(y, z)
    nu2 = 2.0 * a2 - (b2 + tau**2)
    return a2, b2, nu2


def confidence_interval(tau_hat, nu2, n: int, level: float = 0.95):
    """Normal interval ``tau_hat +- q * sqrt(max(nu2, floor) / n)``."""
    if not 0.0 < level < 1.0:
        raise PreconditionError(f"level must lie in (0, 1), got {level}")
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    q = NormalDist().inv_cdf((1.0 + level) / 2.0)
    half = q * np.sqrt(np.maximum(nu2, CI_FLOOR) / n)
    return tau_hat - half, tau_hat + half


def estimate(y, z, partition: Partition, h, level: float = 0.95) -> EstimateRecord:
    """Point estimate, variance estimate and CI in one record."""
    y = _vec(y, "y")
    a2, b2, nu2 = variance_estimator(y, z, partition, h)
    tau = float(ipw_estimate(y, z))
    lo, hi = confidence_interval(tau, nu2, y.size, level)
    pi = build_pi(partition, h)
    return EstimateRecord(tau, float(a2), float(b2), float(nu2), float(lo), float(hi), level, tuple(pi.tolist()))


def balance_diagnostics(partition: Partition, pi, mu1, mu0, s1, s0, g) -> DiagnosticsRecord:
    """Finite-n versions of the balance conditions behind the CLT."""
    mu1, mu0, s1, s0 = (_vec(v, k) for v, k in ((mu1, "mu1"), (mu0, "mu0"), (s1, "s1"), (s0, "s0")))
    gv = as_oracle(g).values
    pi = np.asarray(pi, dtype=np.int64)
    _same_length(("mu1", mu1), ("mu0", mu0), ("s1", s1), ("s0", s0), ("g", gv), ("pi", pi))
    n = gv.size
    if sorted(pi.tolist()) != list(range(n)):
        raise PreconditionError("pi must be a permutation of the units")
    _require_balanced(partition)
    s = list(partition.s)
    sc = list(partition.complement)

    def side_gap(v):
        return abs(math.fsum(v[s]) - math.fsum(v[sc]))

    half = n // 2

    def pair_gap(mu):
        m = mu[pi]
        return math.fsum((m[:half] - m[half:]) ** 2) / n

    def adj_gap(mu):
        m = mu[pi]
        return math.fsum((m[1::2] - m[0::2]) ** 2) / n

    return DiagnosticsRecord(
        var_gap_1=side_gap(s1) / n,
        var_gap_0=side_gap(s0) / n,
        g_gap=side_gap(gv) / math.sqrt(n),
        pair_gap_1=pair_gap(mu1),
        pair_gap_0=pair_gap(mu0),
        adj_gap_1=adj_gap(mu1),
        adj_gap_0=adj_gap(mu0),
    )
