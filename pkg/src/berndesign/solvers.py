"""Partition and pairing solvers behind each design.

The knapsack problem here is two-way number partitioning: pick ``S`` with
``sum_S g`` as large as possible while staying at or below half the total,
i.e. minimise ``|diff|`` with ``diff = sum_S g - sum_{S^c} g <= 0``. The
balanced variant adds ``|S| = n/2``.

Small instances (``n <= exact_limit``) are solved exactly by a
meet-in-the-middle enumeration. Larger ones run complete Karmarkar-Karp
(CKK) branch and bound under a node and time budget, followed by a local
move/swap descent.
"""

from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    HybridGrouping,
    MatchedPairs,
    Partition,
    PreconditionError,
    as_oracle,
    hybrid_group_sizes,
    require_even,
)

LEX_SMALLEST = "lexicographically-smallest S"


@dataclass(frozen=True)
class SolverConfig:
    """Budgets for the partition solvers.

    ``max_nodes`` bounds the CKK search so results do not depend on machine
    speed; ``time_budget`` (seconds) is a wall-clock backstop on top of it.
    """

    exact_limit: int = 24
    time_budget: float = 10.0
    max_nodes: int = 20_000
    tie_break: str = LEX_SMALLEST

    def __post_init__(self):
        if self.exact_limit < 1:
            raise PreconditionError(f"exact_limit must be >= 1, got {self.exact_limit}")
        if not self.time_budget > 0:
            raise PreconditionError(f"time_budget must be > 0, got {self.time_budget}")
        if self.max_nodes < 1:
            raise PreconditionError(f"max_nodes must be >= 1, got {self.max_nodes}")
        if self.tie_break != LEX_SMALLEST:
            raise PreconditionError(f"unsupported tie_break rule {self.tie_break!r}")


DEFAULT_CONFIG = SolverConfig()


def tie_tolerance(values: np.ndarray) -> float:
    """Objective values closer than this count as ties."""
    return 1e-12 * math.fsum(np.abs(values))


def stable_order(values: np.ndarray) -> np.ndarray:
    """Ascending sort order, ties broken by index."""
    return np.argsort(values, kind="stable")


# --- helpers over local 0..m-1 indices --------------------------------------


def _signed_diff(values: np.ndarray, mask: np.ndarray) -> float:
    return math.fsum(np.where(mask, values, -values))


def _lex_key(mask: np.ndarray) -> tuple:
    return tuple(np.flatnonzero(mask).tolist())


def _canonical(values: np.ndarray, mask: np.ndarray, tol: float) -> np.ndarray:
    """Pick the lex-smaller of ``S`` and its complement (both have equal ``|diff|``)."""
    mask = np.asarray(mask, dtype=bool)
    return mask if _lex_key(mask) <= _lex_key(~mask) else ~mask


def _better(values, cand, best, tol) -> bool:
    """Is ``cand`` a strictly better (or tied and lex-smaller) split than ``best``?"""
    dc = abs(_signed_diff(values, cand))
    db = abs(_signed_diff(values, best))
    if dc < db - tol:
        return True
    if dc <= db + tol:
        return _lex_key(cand) < _lex_key(best)
    return False


# --- exact meet-in-the-middle -----------------------------------------------


def _subset_table(vals: np.ndarray):
    """All subsets of ``vals``: bit matrix, signed sums, popcounts."""
    m = vals.size
    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    sums = np.where(bits, vals, -vals).sum(axis=1) if m else np.zeros(1)
    return bits, sums, bits.sum(axis=1)


def _lex_ranks(bits: np.ndarray) -> np.ndarray:
    """Rank of each row's index tuple in tuple order (shorter prefix first)."""
    m = bits.shape[1]
    if m == 0:
        return np.zeros(bits.shape[0], dtype=np.int64)
    padded = np.full(bits.shape, -1, dtype=np.int64)
    for r in range(bits.shape[0]):
        idx = np.flatnonzero(bits[r])
        padded[r, : idx.size] = idx
    order = np.lexsort(padded.T[::-1])
    ranks = np.empty(bits.shape[0], dtype=np.int64)
    ranks[order] = np.arange(bits.shape[0])
    return ranks


class _RangeMin:
    """Sparse table answering argmin over contiguous ranges."""

    def __init__(self, keys: np.ndarray):
        self.keys = keys
        self.levels = [np.arange(keys.size)]
        span = 1
        while 2 * span <= keys.size:
            prev = self.levels[-1]
            left, right = prev[:-span], prev[span:]
            self.levels.append(np.where(keys[left] <= keys[right], left, right))
            span *= 2

    def query(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Positions of the minimum key in ``[lo, hi)``; requires ``hi > lo``."""
        length = hi - lo
        k = np.floor(np.log2(length)).astype(np.int64)
        out = np.empty(lo.size, dtype=np.int64)
        for lvl in np.unique(k):
            sel = k == lvl
            table = self.levels[lvl]
            a = table[lo[sel]]
            b = table[hi[sel] - (1 << lvl)]
            out[sel] = np.where(self.keys[a] <= self.keys[b], a, b)
        return out


def _exact_split(values: np.ndarray, balanced: bool) -> np.ndarray:
    """Globally optimal split with the lex-smallest-S tie rule."""
    n = values.size
    tol = tie_tolerance(values)
    half = n // 2
    bits_a, sum_a, pop_a = _subset_table(values[:half])
    bits_b, sum_b, pop_b = _subset_table(values[half:])
    rank_b = _lex_ranks(bits_b)

    # Group the B side by popcount (a single group when unconstrained).
    if balanced:
        groups = {c: np.flatnonzero(pop_b == c) for c in np.unique(pop_b)}
        need = {c: n // 2 - c for c in np.unique(pop_a)}
    else:
        groups = {0: np.arange(sum_b.size)}
        need = None

    prepared = {}
    for key, members in groups.items():
        order = members[np.argsort(sum_b[members], kind="stable")]
        prepared[key] = (order, sum_b[order], _RangeMin(rank_b[order]))

    def partner(c):
        return need[c] if balanced else 0

    a_groups = (
        {c: np.flatnonzero(pop_a == c) for c in np.unique(pop_a)}
        if balanced
        else {0: np.arange(sum_a.size)}
    )

    # Pass 1: optimal |diff|.
    best = math.inf
    for c, rows in a_groups.items():
        key = partner(c)
        if key not in prepared:
            continue
        _, sorted_b, _ = prepared[key]
        target = -sum_a[rows]
        pos = np.searchsorted(sorted_b, target)
        for p in (np.clip(pos - 1, 0, sorted_b.size - 1), np.clip(pos, 0, sorted_b.size - 1)):
            best = min(best, float(np.min(np.abs(sum_a[rows] + sorted_b[p]))))
    if not math.isfinite(best):
        raise PreconditionError("no feasible split")

    # Pass 2: every split with |diff| <= best + tol, either orientation; keep lex-smallest.
    cand_a, cand_b = [], []
    for c, rows in a_groups.items():
        key = partner(c)
        if key not in prepared:
            continue
        order, sorted_b, rmq = prepared[key]
        lo = np.searchsorted(sorted_b, -best - tol - sum_a[rows], side="left")
        hi = np.searchsorted(sorted_b, best + tol - sum_a[rows], side="right")
        ok = hi > lo
        if not ok.any():
            continue
        pick = rmq.query(lo[ok], hi[ok])
        cand_a.append(rows[ok])
        cand_b.append(order[pick])
    cand_a = np.concatenate(cand_a)
    cand_b = np.concatenate(cand_b)
    masks = np.concatenate([bits_a[cand_a], bits_b[cand_b]], axis=1)
    winner = int(np.argmin(_lex_ranks(masks)))
    return masks[winner]


# --- complete Karmarkar-Karp ------------------------------------------------


def _colour(trees, signs: np.ndarray, sign: int) -> None:
    """Write +-1 labels for every leaf under ``trees`` (diff nodes flip)."""
    stack = [(t, sign) for t in trees]
    while stack:
        node, s = stack.pop()
        if isinstance(node, int):
            signs[node] = s
        else:
            same, left, right = node
            stack.append((left, s))
            stack.append((right, s if same else -s))


def ckk(weights: np.ndarray, max_nodes: int, deadline: float, tol: float) -> np.ndarray:
    """Complete Karmarkar-Karp on nonnegative ``weights``.

    Returns a +-1 vector ``s`` minimising ``|s @ weights|`` among the leaves
    visited. The first leaf is plain KK differencing; the search then
    backtracks until a perfect split (within ``tol``), the node budget or
    the deadline is hit.
    """
    m = weights.size
    signs = np.ones(m, dtype=np.int64)
    if m == 0:
        return signs
    seq = m
    root = sorted((float(w), i, i) for i, w in enumerate(weights))
    stack = [(root, math.fsum(weights))]
    best = math.inf
    nodes = 0
    while stack:
        items, total = stack.pop()
        top = items[-1][0]
        rest = total - top
        # ``total`` is carried incrementally, so a lone item must count as a leaf
        if top >= rest or len(items) == 1:
            value = abs(top - rest)
            if value < best - tol or best == math.inf:
                trial = np.ones(m, dtype=np.int64)
                _colour([items[-1][2]], trial, 1)
                _colour([it[2] for it in items[:-1]], trial, -1)
                exact = abs(math.fsum(trial * weights))
                if exact < best:
                    best = exact
                    signs = trial
            if best <= tol:
                break
            continue
        nodes += 1
        # the first dive (plain KK) always completes
        if best < math.inf and (
            nodes >= max_nodes or (nodes % 64 == 0 and time.monotonic() > deadline)
        ):
            break
        a, b = items[-1], items[-2]
        base = items[:-2]
        seq += 1
        joined = base + [(a[0] + b[0], seq, (True, a[2], b[2]))]
        seq += 1
        split = list(base)
        bisect.insort(split, (a[0] - b[0], seq, (False, a[2], b[2])))
        stack.append((joined, total))
        stack.append((split, total - 2.0 * b[0]))
    return signs


def _descend(values: np.ndarray, mask: np.ndarray, tol: float, allow_moves: bool) -> np.ndarray:
    """Greedy local search over swaps (and single moves unless balanced)."""
    mask = np.array(mask, dtype=bool)
    n = values.size
    for _ in range(4 * n + 4):
        d = _signed_diff(values, mask)
        if abs(d) <= tol:
            break
        best_val, best_move = abs(d) - tol, None
        ins = np.flatnonzero(mask)
        outs = np.flatnonzero(~mask)
        if ins.size and outs.size:
            o_order = outs[np.argsort(values[outs], kind="stable")]
            o_vals = values[o_order]
            target = values[ins] - d / 2.0
            pos = np.searchsorted(o_vals, target)
            for p in (np.clip(pos - 1, 0, o_vals.size - 1), np.clip(pos, 0, o_vals.size - 1)):
                new = np.abs(d - 2.0 * values[ins] + 2.0 * o_vals[p])
                k = int(np.argmin(new))
                if new[k] < best_val:
                    best_val, best_move = new[k], (ins[k], o_order[p[k]])
        if allow_moves:
            signed = np.where(mask, values, -values)
            new = np.abs(d - 2.0 * signed)
            k = int(np.argmin(new))
            if new[k] < best_val:
                best_val, best_move = new[k], (k,)
        if best_move is None:
            break
        trial = mask.copy()
        for i in best_move:
            trial[i] = ~trial[i]
        if abs(_signed_diff(values, trial)) >= abs(d) - tol:
            break
        mask = trial
    return mask


# --- local solvers on a plain vector ----------------------------------------


def _greedy_pairs_mask(values: np.ndarray, tol: float = 0.0) -> np.ndarray:
    order = stable_order(values)
    mask = np.zeros(values.size, dtype=bool)
    running = 0.0
    for k in range(0, values.size, 2):
        lo, hi = order[k], order[k + 1]
        gap = values[hi] - values[lo]
        if running < -tol:
            mask[hi] = True
            running += gap
        else:
            mask[lo] = True
            running -= gap
    return mask


# Heuristic searches run on integers: values are min-max (or max-abs) scaled
# onto a grid of GRID steps, so every comparison is exact and the result is
# unchanged by shifting or positively rescaling the input.
GRID = float(2**26)
GRID_TOL = 0.5


def _grid(values: np.ndarray, shift: bool) -> np.ndarray:
    base = float(values.min()) if shift else 0.0
    span = float(values.max()) - base if shift else float(np.max(np.abs(values)))
    if span == 0.0:
        return np.zeros_like(values)
    return np.rint((values - base) / span * GRID)


def _balanced_heuristic(values: np.ndarray, cfg: SolverConfig, deadline: float) -> np.ndarray:
    tol = GRID_TOL
    order = stable_order(values)
    lo, hi = order[0::2], order[1::2]
    gaps = values[hi] - values[lo]
    # parity can rule out a zero difference, so one grid step counts as perfect
    pair_signs = ckk(gaps, cfg.max_nodes, deadline, 1.0)
    ckk_mask = np.zeros(values.size, dtype=bool)
    ckk_mask[hi[pair_signs > 0]] = True
    ckk_mask[lo[pair_signs < 0]] = True
    best = _canonical(values, _greedy_pairs_mask(values, tol), tol)
    for cand in (_descend(values, ckk_mask, tol, False), _descend(values, best, tol, False)):
        cand = _canonical(values, cand, tol)
        if _better(values, cand, best, tol):
            best = cand
    return best


def _knapsack_heuristic(values: np.ndarray, cfg: SolverConfig, deadline: float) -> np.ndarray:
    tol = GRID_TOL
    signs = ckk(np.abs(values), cfg.max_nodes, deadline, 1.0)
    # a negative weight on the + side contributes negatively: flip it over
    mask = (signs > 0) == (values >= 0)
    return _canonical(values, _descend(values, mask, tol, True), tol)


def _balanced_search(values: np.ndarray, cfg: SolverConfig, deadline: float) -> np.ndarray:
    tol = tie_tolerance(values)
    best = _balanced_heuristic(_grid(values, True), cfg, deadline)
    # the greedy construction on the real values is a hard floor
    greedy = _canonical(values, _greedy_pairs_mask(values, tol), tol)
    if abs(_signed_diff(values, greedy)) < abs(_signed_diff(values, best)) - tol:
        best = greedy
    return best


def _solve_local(values: np.ndarray, balanced: bool, cfg: SolverConfig) -> np.ndarray:
    if values.size <= cfg.exact_limit:
        return _exact_split(values, balanced)
    deadline = time.monotonic() + cfg.time_budget
    if balanced:
        return _balanced_search(values, cfg, deadline)
    tol = tie_tolerance(values)
    best = _knapsack_heuristic(_grid(values, False), cfg, deadline)
    if values.size % 2 == 0:
        cand = _balanced_search(values, cfg, deadline)
        # strict comparison too, so Var(knapsack) <= Var(balanced) holds exactly
        shorter = abs(_signed_diff(values, cand)) < abs(_signed_diff(values, best))
        if shorter or _better(values, cand, best, tol):
            best = cand
    return best


def _to_partition(values: np.ndarray, mask: np.ndarray, units) -> Partition:
    units = tuple(units)
    s = tuple(units[i] for i in np.flatnonzero(mask))
    return Partition(s, units, _signed_diff(values, mask))


# --- public API ---------------------------------------------------------------


def solve_knapsack(g, cfg: SolverConfig = DEFAULT_CONFIG) -> Partition:
    """Optimal two-cluster split: ``S`` with ``sum_S g`` maximal but ``<= sum(g)/2``.

    Exact for ``n <= cfg.exact_limit``; beyond that the best split found by
    CKK plus local search (and, for even ``n``, never worse than the
    balanced heuristic). Among equally good subsets the lex-smallest ``S``
    is returned.
    """
    values = as_oracle(g).values
    mask = _solve_local(values, False, cfg)
    return _to_partition(values, mask, range(values.size))


def solve_balanced(g, cfg: SolverConfig = DEFAULT_CONFIG) -> Partition:
    """Like :func:`solve_knapsack` with the extra constraint ``|S| = n/2``."""
    values = as_oracle(g).values
    require_even(values.size, "balanced partitioning")
    mask = _solve_local(values, True, cfg)
    return _to_partition(values, mask, range(values.size))


def solve_balanced_greedy_pairs(g) -> Partition:
    """Sequential pair construction: sort, then send each pair's larger
    element to whichever side currently has the smaller sum.

    The squared difference never exceeds the sum of squared within-pair gaps.
    """
    values = as_oracle(g).values
    require_even(values.size, "greedy pair partitioning")
    tol = tie_tolerance(values)
    mask = _canonical(values, _greedy_pairs_mask(values, tol), tol)
    return _to_partition(values, mask, range(values.size))


def build_matched_pairs(g) -> MatchedPairs:
    """Pair consecutive units after a stable sort by ``g``."""
    values = as_oracle(g).values
    require_even(values.size, "matched-pair stratification")
    order = stable_order(values).tolist()
    pairs = tuple((order[k], order[k + 1]) for k in range(0, len(order), 2))
    return MatchedPairs(pairs, values.size)


def pair_gaps(g) -> np.ndarray:
    """``g_(2k) - g_(2k-1)`` for the sorted pairs."""
    values = as_oracle(g).values
    require_even(values.size, "pair gaps")
    srt = values[stable_order(values)]
    return srt[1::2] - srt[0::2]


def hybrid_blocks(g, alpha: float) -> list:
    """Contiguous blocks of the sorted order, ``k+2``-sized blocks first."""
    values = as_oracle(g).values
    sizes = hybrid_group_sizes(values.size, alpha)
    order = stable_order(values)
    blocks, start = [], 0
    for size in sizes:
        blocks.append(tuple(sorted(order[start : start + size].tolist())))
        start += size
    return blocks


def build_hybrid(g, alpha: float, mode: str = "knapsack", cfg: SolverConfig = DEFAULT_CONFIG) -> HybridGrouping:
    """Split sorted units into ``floor(n**alpha)`` blocks and solve each one."""
    if mode not in ("knapsack", "balanced"):
        raise PreconditionError(f"mode must be 'knapsack' or 'balanced', got {mode!r}")
    values = as_oracle(g).values
    groups = []
    for units in hybrid_blocks(values, alpha):
        sub = values[list(units)]
        mask = _solve_local(sub, mode == "balanced", cfg)
        groups.append(_to_partition(sub, mask, units))
    return HybridGrouping(tuple(groups), alpha, values.size)
