"""Command-line entry point: ``berndesign <subcommand> ...``.

Exit status: 0 on success, 1 when a precondition fails, 2 on I/O errors
and 64 for usage errors such as an unknown subcommand.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict


from . import io
from .core import Hybrid, PreconditionError, Stratified, TwoCluster, require_even
from .designs import sample_assignments
from .estimation import estimate
from .rng import DEFAULT_SEED
from .robustness import inflation_scaling_experiment
from .sim import CSV_FIELDS, DGPSpec, ProxySpec, reproduce_figure, run_monte_carlo
from .solvers import (
    SolverConfig,
    build_hybrid,
    build_matched_pairs,
    solve_balanced,
    solve_balanced_greedy_pairs,
    solve_knapsack,
)

EX_OK, EX_PRECONDITION, EX_IO, EX_USAGE = 0, 1, 2, 64
SUBCOMMANDS = ("solve", "sample", "estimate", "simulate", "robustness")
SIM_FIELDS = ("design", "n", "replicates", "sample_variance", "mean_estimate",
              "closed_form_variance", "variance_se", "coverage", "median_nu2")
ROBUSTNESS_FIELDS = ("n", "design", "qf_before", "qf_after", "inflation")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def seed_arg(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


def parse_n_grid(text: str) -> list:
    """Comma list; ``a,b,...,c`` extends the ratio ``b/a`` up to ``c``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if "..." not in parts:
        return [int(p) for p in parts]
    k = parts.index("...")
    head = [int(p) for p in parts[:k]]
    stop = int(parts[k + 1])
    if len(head) < 2 or head[0] <= 0 or head[1] <= head[0]:
        raise PreconditionError("an elided n-grid needs two increasing leading values")
    out = list(head)
    ratio = head[1] / head[0]
    while round(out[-1] * ratio) <= stop:
        out.append(int(round(out[-1] * ratio)))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="berndesign", description="Variance-optimal correlated Bernoulli designs.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    seed_help = f"64-bit seed (default {DEFAULT_SEED:#x})"

    p = sub.add_parser("solve", help="build a design from an index vector")
    p.add_argument("--input", required=True, help="CSV with a header and one column 'g'")
    p.add_argument("--method", required=True, choices=("knapsack", "balanced", "greedy-pairs", "pairs", "hybrid"))
    p.add_argument("--alpha", type=float, default=0.5, help="hybrid exponent: about n**alpha groups")
    p.add_argument("--hybrid-mode", choices=("knapsack", "balanced"), default="knapsack",
                   help="split rule inside each hybrid group")
    p.add_argument("--exact-limit", type=int, default=24, help="largest n solved exactly")
    p.add_argument("--time-budget", type=float, default=10.0, help="wall-clock cap for the heuristic search, seconds")
    p.add_argument("--max-nodes", type=int, default=20_000, help="search-node budget for the heuristic")
    p.add_argument("--output", required=True, help="design JSON path")

    p = sub.add_parser("sample", help="draw assignment vectors from a design")
    p.add_argument("--design", required=True, help="design JSON path")
    p.add_argument("--seed", type=seed_arg, default=DEFAULT_SEED, help=seed_help)
    p.add_argument("--reps", type=int, default=1, help="number of assignment rows")
    p.add_argument("--output", required=True, help="CSV with columns z_1..z_n")

    p = sub.add_parser("estimate", help="point estimate, variance estimate and interval")
    p.add_argument("--y", required=True, help="CSV with columns y_1..y_n, one row per replicate")
    p.add_argument("--z", required=True, help="CSV with columns z_1..z_n, rows matching --y")
    p.add_argument("--design", required=True, help="balanced two-cluster design JSON")
    p.add_argument("--h", required=True, help="CSV with one column 'h' used to order units")
    p.add_argument("--level", type=float, default=0.95, help="interval coverage level")
    p.add_argument("--output", required=True, help="JSON path; a list when several rows are given")

    p = sub.add_parser("simulate", help="Monte Carlo variance study")
    p.add_argument("--figure", choices=("fig1", "fig2_3", "appxB", "appxB_proxy"), help="canned protocol")
    p.add_argument("--scale", choices=("desk", "full"), default="desk", help="protocol size")
    p.add_argument("--config", help="JSON with dgp, n, designs, proxy, replicates (instead of --figure)")
    p.add_argument("--seed", type=seed_arg, default=DEFAULT_SEED, help=seed_help)
    p.add_argument("--output", required=True, help="CSV path")

    p = sub.add_parser("robustness", help="worst-case inflation under an l-infinity oracle error")
    p.add_argument("--n-grid", required=True, help="comma list of even n, e.g. 64,128,...,4096")
    p.add_argument("--alpha", type=float, default=0.5, help="hybrid exponent")
    p.add_argument("--epsilon", type=float, required=True, help="perturbation radius")
    p.add_argument("--dgp", default="main", help="dgp id or 'symmetric'")
    p.add_argument("--seed", type=seed_arg, default=DEFAULT_SEED, help=seed_help)
    p.add_argument("--output", required=True, help="CSV path")
    return parser


def cmd_solve(args) -> None:
    g = io.read_column(args.input, "g")
    cfg = SolverConfig(exact_limit=args.exact_limit, time_budget=args.time_budget, max_nodes=args.max_nodes)
    if args.method == "knapsack":
        design = TwoCluster(solve_knapsack(g, cfg))
    elif args.method == "balanced":
        require_even(g.size, "the balanced partition")
        design = TwoCluster(solve_balanced(g, cfg))
    elif args.method == "greedy-pairs":
        design = TwoCluster(solve_balanced_greedy_pairs(g))
    elif args.method == "pairs":
        design = Stratified(build_matched_pairs(g))
    else:
        design = Hybrid(build_hybrid(g, args.alpha, args.hybrid_mode, cfg))
    io.write_design(args.output, design)


def cmd_sample(args) -> None:
    design = io.read_design(args.design)
    io.write_matrix(args.output, sample_assignments(design, args.seed, args.reps), "z", as_int=True)


def cmd_estimate(args) -> None:
    y = io.read_matrix(args.y, "y")
    z = io.read_matrix(args.z, "z")
    h = io.read_column(args.h, "h")
    design = io.read_design(args.design)
    if not isinstance(design, TwoCluster):
        raise PreconditionError("estimation needs a two_cluster design")
    if y.shape != z.shape:
        raise PreconditionError(f"y has shape {y.shape} but z has shape {z.shape}")
    records = []
    for yr, zr in zip(y, z):
        rec = asdict(estimate(yr, zr, design.partition, h, args.level))
        rec["pi"] = [i + 1 for i in rec["pi"]]
        records.append(rec)
    with open(args.output, "w") as fh:
        json.dump(records[0] if len(records) == 1 else records, fh, indent=1)
        fh.write("\n")


def _sim_config(path, seed):
    with open(path) as fh:
        cfg = json.load(fh)
    try:
        proxy = cfg.get("proxy", {"kind": "exact"})
        proxy = ProxySpec(proxy) if isinstance(proxy, str) else ProxySpec(**proxy)
        dgp = DGPSpec(cfg.get("dgp", "main"), float(cfg.get("sigma_y", 1.0)))
        ns = cfg["n"] if isinstance(cfg["n"], list) else [cfg["n"]]
        params = dict(designs=list(cfg["designs"]), replicates=int(cfg["replicates"]),
                      compute_ci=bool(cfg.get("compute_ci", False)), alpha=float(cfg.get("alpha", 0.5)))
        seed = int(cfg.get("seed", seed))
    except (KeyError, TypeError) as exc:
        raise PreconditionError(f"{path}: malformed simulation config ({exc!r})") from None
    return dgp, ns, proxy, params, seed


def cmd_simulate(args) -> None:
    if (args.figure is None) == (args.config is None):
        raise UsageError("simulate: give exactly one of --figure or --config")
    if args.figure:
        io.write_records(args.output, reproduce_figure(args.figure, args.scale, args.seed), CSV_FIELDS)
        return
    dgp, ns, proxy, params, seed = _sim_config(args.config, args.seed)
    rows = []
    for n in ns:
        results = run_monte_carlo(dgp, int(n), params["designs"], proxy, params["replicates"], seed,
                                  params["compute_ci"], alpha=params["alpha"])
        for r in results:
            row = asdict(r)
            row["design"] = row.pop("design_kind")
            rows.append({k: ("" if v is None else v) for k, v in row.items()})
    io.write_records(args.output, rows, SIM_FIELDS)


def cmd_robustness(args) -> None:
    records = inflation_scaling_experiment(parse_n_grid(args.n_grid), args.alpha, args.epsilon, args.dgp, args.seed)
    io.write_records(args.output, records, ROBUSTNESS_FIELDS)


COMMANDS = {"solve": cmd_solve, "sample": cmd_sample, "estimate": cmd_estimate,
            "simulate": cmd_simulate, "robustness": cmd_robustness}


def dispatch(args) -> int:
    try:
        COMMANDS[args.subcommand](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_PRECONDITION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EX_IO
    return EX_OK


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in ("-h", "--help"):
        parser.print_help()
        return EX_OK
    if not argv or argv[0] not in SUBCOMMANDS:
        parser.print_usage(sys.stderr)
        if argv:
            print(f"berndesign: unknown subcommand {argv[0]!r}", file=sys.stderr)
        return EX_USAGE
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help inside a subcommand
        return int(exc.code or 0)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
