"""Domain types shared across the package.

All indices are 0-based internally. The JSON/CSV formats and all
user-facing messages use 1-based indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OracleVector:
    """Per-unit index values ``g`` (or a proxy ``h`` of them)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).ravel()
        if arr.size < 1:
            raise PreconditionError("oracle vector must have at least one entry")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise PreconditionError(
                f"oracle vector entry {bad[0] + 1} is not finite ({arr[bad[0]]})"
            )
        object.__setattr__(self, "values", _frozen_array(arr))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, OracleVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


def as_oracle(g) -> OracleVector:
    return g if isinstance(g, OracleVector) else OracleVector(g)


def signed_sum_difference(values: np.ndarray, s: Sequence[int], units: Sequence[int]) -> float:
    """Correctly rounded ``sum(values[s]) - sum(values[units \\ s])``."""
    members = set(s)
    return math.fsum(values[i] if i in members else -values[i] for i in units)


@dataclass(frozen=True)
class Partition:
    """A split of ``units`` into ``s`` and its complement.

    ``diff`` caches ``sum_{s} g - sum_{units \\ s} g`` for the vector the
    partition was built from. Use :meth:`from_values` to get a consistent
    cache; the bare constructor exists for deserialization.
    """

    s: tuple
    units: tuple
    diff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(sorted(int(i) for i in self.s)))
        object.__setattr__(self, "units", tuple(sorted(int(i) for i in self.units)))
        object.__setattr__(self, "diff", float(self.diff))

    @classmethod
    def from_values(cls, s, g, units=None) -> "Partition":
        vals = as_oracle(g).values
        units = tuple(range(vals.size)) if units is None else tuple(sorted(units))
        s = tuple(sorted(int(i) for i in s))
        return cls(s, units, signed_sum_difference(vals, s, units))

    @classmethod
    def whole(cls, s, n: int, diff: float) -> "Partition":
        return cls(tuple(s), tuple(range(n)), diff)

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def complement(self) -> tuple:
        members = set(self.s)
        return tuple(i for i in self.units if i not in members)

    @property
    def balanced(self) -> bool:
        return 2 * len(self.s) == self.n

    def recompute_diff(self, g) -> float:
        return signed_sum_difference(as_oracle(g).values, self.s, self.units)

    def violations(self) -> list:
        out = []
        universe = set(self.units)
        if len(universe) != len(self.units):
            out.append("partition units contain duplicates")
        if len(set(self.s)) != len(self.s):
            out.append("partition subset contains duplicates")
        for i in self.s:
            if i not in universe:
                out.append(f"index {i + 1} in subset is outside the unit set")
        if not math.isfinite(self.diff):
            out.append("partition diff is not finite")
        return out


@dataclass(frozen=True)
class MatchedPairs:
    """Disjoint index pairs covering ``range(n)``."""

    pairs: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(
            self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs)
        )
        object.__setattr__(self, "n", int(self.n))

    def violations(self) -> list:
        out = []
        if self.n % 2:
            out.append(f"matched pairs need an even number of units, got n={self.n}")
        counts = {}
        for pair in self.pairs:
            for i in pair:
                counts[i] = counts.get(i, 0) + 1
        for i in sorted(counts):
            if not 0 <= i < self.n:
                out.append(f"index {i + 1} is outside 1..{self.n}")
            elif counts[i] > 1:
                out.append(f"index {i + 1} appears {_times(counts[i])}")
        for i in range(self.n):
            if i not in counts:
                out.append(f"index {i + 1} missing")
        return out


def _times(k: int) -> str:
    return "twice" if k == 2 else f"{k} times"


def hybrid_group_sizes(n: int, alpha: float) -> list:
    """Group sizes of the hybrid construction, large groups first."""
    if not 0.0 < alpha < 1.0:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 2 or n % 2:
        raise PreconditionError(f"hybrid designs need an even n >= 2, got n={n}")
    G = hybrid_group_count(n, alpha)
    k = 2 * (n // (2 * G))
    r = (n - k * G) // 2
    return [k + 2] * r + [k] * (G - r)


def hybrid_group_count(n: int, alpha: float) -> int:
    # float powers like 1000 ** (1/3) land just below the integer
    G = int(math.floor(n ** alpha))
    if (G + 1) ** (1.0 / alpha) <= n * (1 + 1e-12):
        G += 1
    # every group needs at least one pair
    return min(max(G, 1), max(n // 2, 1))


@dataclass(frozen=True)
class HybridGrouping:
    """Independent two-cluster designs over contiguous sorted blocks."""

    groups: tuple
    alpha: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "n", int(self.n))

    @property
    def g_count(self) -> int:
        return len(self.groups)

    @property
    def base_size(self) -> int:
        return 2 * (self.n // (2 * hybrid_group_count(self.n, self.alpha)))

    @property
    def remainder_groups(self) -> int:
        return (self.n - self.base_size * hybrid_group_count(self.n, self.alpha)) // 2

    def violations(self) -> list:
        out = []
        if not 0.0 < self.alpha < 1.0:
            out.append(f"alpha must lie in (0, 1), got {self.alpha}")
            return out
        if self.n < 2 or self.n % 2:
            out.append(f"hybrid designs need an even n >= 2, got n={self.n}")
            return out
        expected = hybrid_group_sizes(self.n, self.alpha)
        if len(self.groups) != len(expected):
            out.append(f"expected {len(expected)} groups, got {len(self.groups)}")
        sizes = sorted((grp.n for grp in self.groups), reverse=True)
        if len(self.groups) == len(expected) and sizes != expected:
            out.append(f"group sizes {sizes} do not match {expected}")
        seen = {}
        for gi, grp in enumerate(self.groups):
            for msg in grp.violations():
                out.append(f"group {gi + 1}: {msg}")
            if grp.n % 2:
                out.append(f"group {gi + 1} has odd size {grp.n}")
            for i in grp.units:
                seen[i] = seen.get(i, 0) + 1
        for i in sorted(seen):
            if not 0 <= i < self.n:
                out.append(f"index {i + 1} is outside 1..{self.n}")
            elif seen[i] > 1:
                out.append(f"index {i + 1} appears {_times(seen[i])}")
        for i in range(self.n):
            if i not in seen:
                out.append(f"index {i + 1} missing")
        return out


# --- design variants -------------------------------------------------------


@dataclass(frozen=True)
class IID:
    n: int


@dataclass(frozen=True)
class TwoCluster:
    partition: Partition

    @property
    def n(self) -> int:
        return self.partition.n


@dataclass(frozen=True)
class Stratified:
    pairs: MatchedPairs

    @property
    def n(self) -> int:
        return self.pairs.n


@dataclass(frozen=True)
class Hybrid:
    grouping: HybridGrouping

    @property
    def n(self) -> int:
        return self.grouping.n


@dataclass(frozen=True, eq=False)
class Mixture:
    """Explicit distribution: rows of ``support`` drawn with ``weights``."""

    support: np.ndarray
    weights: np.ndarray
    n: int = field(default=-1)

    def __post_init__(self):
        sup = np.atleast_2d(np.asarray(self.support, dtype=np.int8))
        object.__setattr__(self, "support", _frozen_array(sup, np.int8))
        object.__setattr__(self, "weights", _frozen_array(np.ravel(self.weights)))
        if self.n < 0:
            object.__setattr__(self, "n", int(sup.shape[1]))

    @classmethod
    def from_pairs(cls, items) -> "Mixture":
        items = list(items)
        return cls(np.array([v for v, _ in items]), np.array([w for _, w in items]))

    def __eq__(self, other):
        if not isinstance(other, Mixture):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.weights, other.weights)
        )


DesignSpec = Union[IID, TwoCluster, Stratified, Hybrid, Mixture]


@dataclass(frozen=True, eq=False)
class AssignmentVector:
    z: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.z).ravel()
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise PreconditionError("assignment entries must be 0 or 1")
        object.__setattr__(self, "z", _frozen_array(arr, np.int8))

    @property
    def n(self) -> int:
        return int(self.z.size)

    def flipped(self) -> "AssignmentVector":
        return AssignmentVector(1 - self.z)

    def __eq__(self, other):
        if not isinstance(other, AssignmentVector):
            return NotImplemented
        return np.array_equal(self.z, other.z)


def validate_design(design) -> list:
    """Describe every invariant the design violates; empty when valid."""
    if isinstance(design, IID):
        return [] if design.n >= 1 else [f"iid design needs n >= 1, got n={design.n}"]
    if isinstance(design, TwoCluster):
        return design.partition.violations()
    if isinstance(design, Stratified):
        return design.pairs.violations()
    if isinstance(design, Hybrid):
        return design.grouping.violations()
    if isinstance(design, Mixture):
        out = []
        w = design.weights
        sup = design.support
        if sup.shape[0] != w.size:
            out.append(f"{sup.shape[0]} support vectors but {w.size} weights")
        if sup.shape[1] != design.n:
            out.append(f"support vectors have length {sup.shape[1]}, expected {design.n}")
        if not np.isin(sup, (0, 1)).all():
            out.append("support vectors must be binary")
        for k in np.flatnonzero(w < 0):
            out.append(f"weight {k + 1} is negative ({w[k]:g})")
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-12:
            out.append(f"weights sum to {total:g}")
        if not out:
            marg = w @ sup
            for i in np.flatnonzero(np.abs(marg - 0.5) > 1e-12):
                out.append(f"index {i + 1} has treatment probability {marg[i]:g}, not 1/2")
        return out
    return [f"unknown design type {type(design).__name__}"]


def require_valid(design) -> None:
    problems = validate_design(design)
    if problems:
        raise PreconditionError("invalid design: " + "; ".join(problems))


def require_even(n: int, what: str) -> None:
    if n % 2:
        raise PreconditionError(f"{what} requires an even number of units, got n={n}")
