"""Sampling, support enumeration and covariance for each design.

Every structured design is a set of independent fair bits: unit ``i``
reads bit ``cluster[i]`` and flips it when ``flip[i]`` is set. IID uses one
bit per unit, a two-cluster design one bit in total, matched pairs one bit
per pair and a hybrid design one bit per group.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng
from .core import (
    IID,
    AssignmentVector,
    Hybrid,
    Mixture,
    PreconditionError,
    Stratified,
    TwoCluster,
    as_oracle,
    require_valid,
)

MAX_SUPPORT_BITS = 20
MAX_DENSE_N = 2048
CHUNK = 4096


def bit_structure(design):
    """``(cluster, flip, n_bits)`` arrays for a non-mixture design."""
    n = design.n
    cluster = np.zeros(n, dtype=np.int64)
    flip = np.zeros(n, dtype=np.int8)
    if isinstance(design, IID):
        return np.arange(n), flip, n
    if isinstance(design, TwoCluster):
        flip[list(design.partition.complement)] = 1
        return cluster, flip, 1
    if isinstance(design, Stratified):
        for k, (a, b) in enumerate(design.pairs.pairs):
            cluster[a] = cluster[b] = k
            flip[b] = 1
        return cluster, flip, len(design.pairs.pairs)
    if isinstance(design, Hybrid):
        for k, grp in enumerate(design.grouping.groups):
            cluster[list(grp.units)] = k
            flip[list(grp.complement)] = 1
        return cluster, flip, len(design.grouping.groups)
    raise PreconditionError(f"{type(design).__name__} has no bit structure")


def _chunk_draws(design, seed: int, chunk: int, rows: int = CHUNK) -> np.ndarray:
    # draws are sequential, so a short chunk is a prefix of the full one
    gen = rng.stream(seed, "assign", chunk)
    if isinstance(design, Mixture):
        cdf = np.cumsum(design.weights)
        cdf[-1] = 1.0
        picks = np.searchsorted(cdf, gen.random(rows), side="right")
        return design.support[np.minimum(picks, cdf.size - 1)]
    cluster, flip, n_bits = bit_structure(design)
    bits = gen.integers(0, 2, size=(rows, n_bits), dtype=np.int8)
    return bits[:, cluster] ^ flip


def sample_assignments(design, seed: int, reps: int) -> np.ndarray:
    """``reps`` assignment rows; row ``r`` depends only on ``(design, seed, r)``."""
    require_valid(design)
    if reps < 0:
        raise PreconditionError(f"reps must be >= 0, got {reps}")
    blocks = []
    for chunk in range(math.ceil(reps / CHUNK)):
        blocks.append(_chunk_draws(design, seed, chunk, min(CHUNK, reps - chunk * CHUNK)))
    if not blocks:
        return np.zeros((0, design.n), dtype=np.int8)
    return np.concatenate(blocks)


def sample_assignment(design, seed: int) -> AssignmentVector:
    """One draw; identical to the first row of :func:`sample_assignments`."""
    return AssignmentVector(sample_assignments(design, seed, 1)[0])


def mixture_representation(design) -> list:
    """Full support as ``(v, weight)`` pairs with exact dyadic weights.

    Structured designs enumerate all ``2**B`` bit patterns; a two-cluster
    design therefore yields ``v`` and ``1 - v`` with weight 1/2 each.
    Mixtures return their own (unmerged) support.
    """
    require_valid(design)
    if isinstance(design, Mixture):
        return [(v.copy(), float(w)) for v, w in zip(design.support, design.weights)]
    cluster, flip, n_bits = bit_structure(design)
    if n_bits > MAX_SUPPORT_BITS:
        raise PreconditionError(
            f"support has 2**{n_bits} points; at most 2**{MAX_SUPPORT_BITS} can be enumerated"
        )
    codes = np.arange(1 << n_bits, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n_bits)) & 1).astype(np.int8)
    vs = bits[:, cluster] ^ flip
    w = 0.5 ** n_bits
    return [(v, w) for v in vs]


def mix(designs, weights) -> Mixture:
    """Mixture that picks ``designs[k]`` with probability ``weights[k]``."""
    support, out_w = [], []
    for d, wk in zip(designs, weights):
        for v, w in mixture_representation(d):
            support.append(v)
            out_w.append(wk * w)
    return Mixture(np.array(support), np.array(out_w))


def _support_arrays(design):
    rep = mixture_representation(design)
    return np.array([v for v, _ in rep], dtype=float), np.array([w for _, w in rep])


def dense_covariance(design) -> np.ndarray:
    """Exact ``Cov(Z)`` as an ``n x n`` matrix (testing aid; ``n <= 2048``)."""
    require_valid(design)
    if design.n > MAX_DENSE_N:
        raise PreconditionError(
            f"dense covariance limited to n <= {MAX_DENSE_N}, got n={design.n}"
        )
    if isinstance(design, Mixture):
        sup, w = _support_arrays(design)
        mean = w @ sup
        return (sup.T * w) @ sup - np.outer(mean, mean)
    cluster, flip, _ = bit_structure(design)
    sign = 1.0 - 2.0 * flip
    same = cluster[:, None] == cluster[None, :]
    return 0.25 * np.where(same, np.outer(sign, sign), 0.0)


def quadratic_form(g, design) -> float:
    """``g' Cov(Z) g`` in ``O(n)`` from the bit structure."""
    values = as_oracle(g).values
    if values.size != design.n:
        raise PreconditionError(f"g has {values.size} entries, design has n={design.n}")
    require_valid(design)
    if isinstance(design, Mixture):
        sup, w = _support_arrays(design)
        proj = sup @ values
        mean = math.fsum(w * proj)
        return math.fsum(w * (proj - mean) ** 2)
    cluster, flip, n_bits = bit_structure(design)
    signed = np.where(flip == 1, -values, values)
    if n_bits == 1:
        return 0.25 * math.fsum(signed) ** 2
    per_bit = np.bincount(cluster, weights=signed, minlength=n_bits)
    return 0.25 * math.fsum(per_bit**2)


def marginal_means(design) -> np.ndarray:
    if not isinstance(design, Mixture):
        require_valid(design)
        return np.full(design.n, 0.5)
    sup, w = _support_arrays(design)
    return w @ sup
