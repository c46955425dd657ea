"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import filecmp
import math
import time

import numpy as np
import pytest

from berndesign import (
    DGPSpec,
    PerturbationSpec,
    ProxySpec,
    Stratified,
    TwoCluster,
    Hybrid,
    build_hybrid,
    build_matched_pairs,
    closed_form_after,
    conditional_variance,
    ex_post_mean,
    generate_population,
    run_clt_study,
    run_monte_carlo,
    solve_balanced,
    solve_balanced_greedy_pairs,
    solve_knapsack,
    worst_case_perturbation,
)
from berndesign.cli import main
from berndesign.rng import DEFAULT_SEED
from berndesign.robustness import inflation_scaling_experiment, loglog_slope
from berndesign.sim import FIG1_DESIGNS, PERTURB_DESIGNS, build_design, nu2_truth
from berndesign.solvers import pair_gaps
from oracles import KINDS, balanced_min, knapsack_min, random_vector


def test_01_solver_optimality(report):
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    failures = 0
    for case in range(200):
        n = int(rng.integers(4, 17))
        g = random_vector(rng, n, KINDS[case % len(KINDS)])
        tol = 1e-9 * (1 + np.sum(np.abs(g)) ** 2)
        if abs(solve_knapsack(g).diff ** 2 - knapsack_min(g)) > tol:
            failures += 1
        if n % 2 == 0 and abs(solve_balanced(g).diff ** 2 - balanced_min(g)) > tol:
            failures += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 60
    report("1 solver optimality", ok, f"{failures} failures over 200 cases in {elapsed:.1f}s")
    assert ok


def test_02_monte_carlo_identity(report):
    start = time.perf_counter()
    results = run_monte_carlo(DGPSpec("main"), 50, FIG1_DESIGNS, ProxySpec(), 200_000, DEFAULT_SEED)
    elapsed = time.perf_counter() - start
    gaps = {r.design_kind: r.sample_variance / r.closed_form_variance - 1 for r in results}
    worst = max(abs(v) for v in gaps.values())
    ok = worst < 0.02 and elapsed < 180
    report("2 MC variance identity", ok, f"max relative gap {worst:.4f} ({elapsed:.1f}s)")
    assert ok


def test_03_design_ordering(report):
    bad = []
    for n in (50, 100, 250):
        pop = generate_population(DGPSpec("main"), n, DEFAULT_SEED)
        cf = {d: conditional_variance(pop.g, pop.s1, pop.s0, build_design(d, pop.g)) for d in FIG1_DESIGNS}
        checks = [
            cf["bern"] <= cf["sib"] <= cf["stratified"],
            cf["bern"] <= cf["hybrid_bern"] <= cf["stratified"],
            cf["sib"] <= cf["hybrid_sib"] <= cf["stratified"],
            min(cf.values()) >= 4 / n,
        ]
        if not all(checks):
            bad.append(n)
    ok = not bad
    report("3 closed-form ordering", ok, "all n in {50,100,250}" if ok else f"violations at n={bad}")
    assert ok


def test_04_greedy_bound_chain(report):
    rng = np.random.default_rng(1004)
    violations = 0
    for case in range(1000):
        n = 2 * int(rng.integers(1, 33))
        g = random_vector(rng, n, ("uniform", "normal", "lognormal", "heavy")[case % 4])
        balanced = solve_balanced(g).diff ** 2
        greedy = solve_balanced_greedy_pairs(g).diff ** 2
        bound = float(np.sum(pair_gaps(g) ** 2))
        slack = 1e-12 * (1 + np.sum(np.abs(g)) ** 2)
        if not (balanced <= greedy + slack and greedy <= bound + slack):
            violations += 1
    ok = violations == 0
    report("4 balanced <= greedy <= pair-gap bound", ok, f"{violations} violations in 1000 cases")
    assert ok


def test_05_zero_difference_no_ex_post_bias(report):
    rng = np.random.default_rng(1005)
    checked, worst = 0, 0.0
    for case in range(400):
        n = int(rng.integers(2, 41))
        mu1 = rng.integers(-9, 10, n).astype(float)
        mu0 = rng.integers(-9, 10, n).astype(float)
        g = mu1 + mu0
        for part in [solve_knapsack(g)] + ([solve_balanced(g)] if n % 2 == 0 else []):
            if part.diff != 0:
                continue
            z = np.zeros(n, dtype=int)
            z[list(part.s)] = 1
            tau_n = math.fsum(mu1 - mu0) / n
            worst = max(worst, abs(ex_post_mean(mu1, mu0, z) - tau_n), abs(ex_post_mean(mu1, mu0, 1 - z) - tau_n))
            checked += 1
    ok = checked > 0 and worst <= 1e-10
    report("5 zero diff removes ex-post bias", ok, f"{checked} zero-diff cases, max error {worst:.2e}")
    assert ok


def test_06_worst_case_identities(report):
    rng = np.random.default_rng(1006)
    sizes = [8, 16, 32, 64, 128, 256, 512, 1024] + [2 * int(k) for k in rng.integers(4, 513, 24)]
    bad = 0
    for n in sizes:
        h = random_vector(rng, n, KINDS[n % 4])
        eps = float(rng.uniform(0.001, 1.0))
        designs = {
            "two_cluster": TwoCluster(solve_knapsack(h)),
            "stratified": Stratified(build_matched_pairs(h)),
            "hybrid": Hybrid(build_hybrid(h, 0.5)),
        }
        for kind, design in designs.items():
            spec = PerturbationSpec(eps, kind)
            _, before, after = worst_case_perturbation(h, spec, design)
            closed = closed_form_after(h, spec, design)
            if abs(after - closed) > 1e-9 * max(1.0, abs(closed)):
                bad += 1
            inflation = after - before
            if kind == "two_cluster" and inflation < n**2 * eps**2 / 4 * (1 - 1e-12):
                bad += 1
            if kind == "stratified" and inflation > (n / 2 * eps**2 + eps * (h.max() - h.min())) * (1 + 1e-12):
                bad += 1
    ok = bad == 0
    report("6 worst-case identities and bounds", ok, f"{bad} violations over {len(sizes)} sizes x 3 designs")
    assert ok


def test_07_hybrid_inflation_slope(report):
    grid = [64 * 2**k for k in range(7)]
    recs = inflation_scaling_experiment(grid, 0.5, 0.01, "symmetric", DEFAULT_SEED)
    infl = [r["inflation"] for r in recs if r["design"] == "hybrid"]
    slope = loglog_slope(grid, infl)
    ok = abs(slope - 1.5) <= 0.15
    report("7 hybrid inflation slope", ok, f"slope {slope:.3f} (target 1.5 +- 0.15)")
    assert ok


def test_08_clt_coverage_and_variance_estimate(report):
    start = time.perf_counter()
    res = run_clt_study(DGPSpec("main"), 1000, 2000, DEFAULT_SEED)
    truth = nu2_truth(DGPSpec("main"), 1_000_000)
    elapsed = time.perf_counter() - start
    rel = res.median_nu2 / truth - 1
    ok = 0.93 <= res.coverage <= 0.97 and abs(rel) <= 0.10 and elapsed < 300
    report(
        "8 CLT coverage and variance estimate",
        ok,
        f"coverage {res.coverage:.3f}, median nu2 {res.median_nu2:.2f} vs {truth:.2f} ({rel:+.3f}), {elapsed:.0f}s",
    )
    assert ok


def test_09_perturbation_ranking(report):
    pop = generate_population(DGPSpec("main"), 1000, DEFAULT_SEED)
    sums = {d: 0.0 for d in PERTURB_DESIGNS}
    for p in range(20):
        res = run_monte_carlo(
            DGPSpec("main"), 1000, PERTURB_DESIGNS, ProxySpec("gaussian_perturb", 400.0), 500,
            DEFAULT_SEED, population=pop, proxy_stream=p,
        )
        for r in res:
            sums[r.design_kind] += r.sample_variance / 20
    ok = sums["bern"] > sums["hybrid_bern"] and sums["hybrid_bern"] <= 1.5 * sums["stratified"]
    detail = ", ".join(f"{k} {v:.4f}" for k, v in sums.items())
    report("9 perturbation ranking", ok, detail)
    assert ok


def test_10_invariance(report):
    rng = np.random.default_rng(1010)
    shift_bad = scale_bad = 0
    for case in range(500):
        n = 2 * int(rng.integers(1, 33))
        g = random_vector(rng, n, KINDS[case % len(KINDS)])
        base = solve_balanced(g)
        c = float(rng.uniform(-50, 50))
        shifted = solve_balanced(g + c)
        if shifted.s != base.s or shifted.recompute_diff(g) != base.diff:
            shift_bad += 1
        k = float(rng.lognormal(0, 2))
        if solve_balanced(k * g).s != base.s:
            scale_bad += 1
    ok = shift_bad == 0 and scale_bad == 0
    report("10 shift and scale invariance", ok, f"{shift_bad} shift / {scale_bad} scale failures in 500 cases")
    assert ok


def _run_twice(tmp_path, name, argv_for):
    outs = []
    for k in range(2):
        out = tmp_path / f"{name}_{k}.out"
        assert main(argv_for(out)) == 0
        outs.append(out)
    return filecmp.cmp(outs[0], outs[1], shallow=False)


def test_11_cli_determinism(report, tmp_path):
    g = np.random.default_rng(1011).normal(size=24)
    g_csv = tmp_path / "g.csv"
    g_csv.write_text("g\n" + "".join(f"{v!r}\n" for v in g.tolist()))
    h_csv = tmp_path / "h.csv"
    h_csv.write_text("h\n" + "".join(f"{v!r}\n" for v in g.tolist()))
    design = tmp_path / "design.json"
    main(["solve", "--input", str(g_csv), "--method", "balanced", "--output", str(design)])
    z_csv = tmp_path / "z.csv"
    main(["sample", "--design", str(design), "--seed", "7", "--reps", "5", "--output", str(z_csv)])
    z = np.loadtxt(z_csv, delimiter=",", skiprows=1)
    y_csv = tmp_path / "y.csv"
    y = np.where(z == 1, g + 2.0, g - 1.0) + 0.1
    y_csv.write_text(",".join(f"y_{i}" for i in range(1, 25)) + "\n"
                     + "".join(",".join(repr(float(v)) for v in row) + "\n" for row in y))
    checks = {
        "solve": lambda o: ["solve", "--input", str(g_csv), "--method", "hybrid", "--output", str(o)],
        "sample": lambda o: ["sample", "--design", str(design), "--seed", "7", "--reps", "50", "--output", str(o)],
        "estimate": lambda o: ["estimate", "--y", str(y_csv), "--z", str(z_csv), "--design", str(design),
                               "--h", str(h_csv), "--output", str(o)],
        "simulate": lambda o: ["simulate", "--figure", "fig1", "--scale", "desk", "--seed", "7", "--output", str(o)],
        "robustness": lambda o: ["robustness", "--n-grid", "64,128,...,1024", "--epsilon", "0.1", "--dgp", "main",
                                 "--seed", "7", "--output", str(o)],
    }
    same = {name: _run_twice(tmp_path, name, argv) for name, argv in checks.items()}
    ok = all(same.values())
    report("11 CLI determinism", ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert ok
