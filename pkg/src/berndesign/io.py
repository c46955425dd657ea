"""JSON and CSV formats. External indices are 1-based."""

from __future__ import annotations

import csv
import json

import numpy as np

from .core import (
    IID,
    Hybrid,
    HybridGrouping,
    MatchedPairs,
    Mixture,
    Partition,
    PreconditionError,
    Stratified,
    TwoCluster,
)

PAYLOADS = {"two_cluster": "s", "iid": None, "stratified": "pairs", "hybrid": "groups", "mixture": "mixture"}


def _one_based(idx):
    return [int(i) + 1 for i in idx]


def _zero_based(idx, n, what):
    out = []
    for i in idx:
        i = int(i)
        if not 1 <= i <= n:
            raise PreconditionError(f"{what} index {i} is outside 1..{n}")
        out.append(i - 1)
    return out


def design_to_dict(design) -> dict:
    if isinstance(design, IID):
        return {"variant": "iid", "n": design.n}
    if isinstance(design, TwoCluster):
        p = design.partition
        return {"variant": "two_cluster", "n": p.n, "s": _one_based(p.s), "diff": p.diff}
    if isinstance(design, Stratified):
        return {"variant": "stratified", "n": design.n, "pairs": [_one_based(pr) for pr in design.pairs.pairs]}
    if isinstance(design, Hybrid):
        gr = design.grouping
        groups = [{"units": _one_based(p.units), "s": _one_based(p.s), "diff": p.diff} for p in gr.groups]
        return {"variant": "hybrid", "n": gr.n, "alpha": gr.alpha, "groups": groups}
    if isinstance(design, Mixture):
        items = [{"v": v.tolist(), "w": float(w)} for v, w in zip(design.support, design.weights)]
        return {"variant": "mixture", "n": design.n, "mixture": items}
    raise PreconditionError(f"cannot serialize {type(design).__name__}")


def design_from_dict(data: dict):
    try:
        return _design_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise PreconditionError(f"malformed design JSON: {exc!r}") from None


def _design_from_dict(data: dict):
    variant = data.get("variant")
    if variant not in PAYLOADS:
        raise PreconditionError(f"unknown design variant {variant!r}")
    present = [k for k in ("s", "pairs", "groups", "mixture") if k in data]
    expected = PAYLOADS[variant]
    if present != ([expected] if expected else []):
        raise PreconditionError(f"variant {variant!r} needs exactly the payload {expected!r}, found {present}")
    n = int(data["n"])
    if variant == "iid":
        return IID(n)
    if variant == "two_cluster":
        return TwoCluster(Partition.whole(_zero_based(data["s"], n, "s"), n, data.get("diff", 0.0)))
    if variant == "stratified":
        return Stratified(MatchedPairs(tuple(tuple(_zero_based(pr, n, "pair")) for pr in data["pairs"]), n))
    if variant == "hybrid":
        groups = tuple(
            Partition(_zero_based(grp["s"], n, "s"), _zero_based(grp["units"], n, "group"), grp.get("diff", 0.0))
            for grp in data["groups"]
        )
        return Hybrid(HybridGrouping(groups, data["alpha"], n))
    items = data["mixture"]
    return Mixture(np.array([it["v"] for it in items]), np.array([it["w"] for it in items], dtype=float), n)


def write_design(path, design) -> None:
    with open(path, "w") as fh:
        json.dump(design_to_dict(design), fh, indent=1)
        fh.write("\n")


def read_design(path):
    with open(path) as fh:
        return design_from_dict(json.load(fh))


def fmt(x) -> str:
    """Lossless float text (17 significant digits)."""
    return format(float(x), ".17g")


def read_column(path, name: str) -> np.ndarray:
    """One named column of a headed CSV as floats."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or name not in reader.fieldnames:
            raise PreconditionError(f"{path}: expected a header with column {name!r}")
        try:
            return np.array([float(row[name]) for row in reader])
        except ValueError as exc:
            raise PreconditionError(f"{path}: non-numeric entry in column {name!r} ({exc})") from None


def read_matrix(path, prefix: str) -> np.ndarray:
    """Columns ``prefix_1..prefix_n`` of a headed CSV, one row per replicate."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PreconditionError(f"{path}: empty file")
    header = rows[0]
    want = [f"{prefix}_{i + 1}" for i in range(len(header))]
    if header != want:
        raise PreconditionError(f"{path}: header must be {prefix}_1..{prefix}_n")
    try:
        return np.array([[float(v) for v in row] for row in rows[1:]]).reshape(-1, len(header))
    except ValueError as exc:
        raise PreconditionError(f"{path}: non-numeric entry ({exc})") from None


def write_matrix(path, matrix, prefix: str, as_int: bool = False) -> None:
    matrix = np.atleast_2d(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{prefix}_{i + 1}" for i in range(matrix.shape[1])])
        for row in matrix:
            writer.writerow([str(int(v)) for v in row] if as_int else [fmt(v) for v in row])


def write_records(path, rows, fields) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([fmt(row[f]) if isinstance(row[f], float) else row[f] for f in fields])
