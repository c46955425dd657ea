# Monte Carlo check of the closed-form variance, then a noisy-proxy comparison.
from berndesign import DGPSpec, ProxySpec, run_monte_carlo
from berndesign.sim import FIG1_DESIGNS, PERTURB_DESIGNS, generate_population

results = run_monte_carlo(DGPSpec("main"), 100, FIG1_DESIGNS, ProxySpec(), replicates=20_000, seed=1)
print(f"{'design':>12} {'MC var':>10} {'closed form':>12}")
for r in results:
    print(f"{r.design_kind:>12} {r.sample_variance:10.5f} {r.closed_form_variance:12.5f}")
print("noise floor 4/n =", 4 / 100)

# designs built from a noisy proxy h = g + N(0, 400); averaged over 10 proxy draws
pop = generate_population(DGPSpec("main"), 250, 1)
avg = {d: 0.0 for d in PERTURB_DESIGNS}
for p in range(10):
    res = run_monte_carlo(
        DGPSpec("main"), 250, PERTURB_DESIGNS, ProxySpec("gaussian_perturb", 400.0),
        replicates=500, seed=1, population=pop, proxy_stream=p,
    )
    for r in res:
        avg[r.design_kind] += r.sample_variance / 10
for d, v in avg.items():
    print(f"{d:>12}: {v:.4f}")
