"""
Risk versus sample size
=======================

A reduced Monte Carlo plan: the median risk should fall roughly like
n^(-2r/(2r+1)), which is n^(-0.8) for r = 2.  Use the CLI ``experiment``
command for the full-size run.
"""

from sparsevcm import DictionarySpec, ExperimentPlan, NoiseSpec, TruthSpec, run_plan

plan = ExperimentPlan(
    name="demo",
    dictionary=DictionarySpec("gaussian", 50),
    truth=TruthSpec.leading(50, 2, 2, 2.0, 2.0, 1.0),
    noise=NoiseSpec(),
    sigma=0.5,
    n_grid=(256, 512, 1024, 2048, 4096),
    replicates=10,
    master_seed=7,
)
res = run_plan(plan)

for n in plan.n_grid:
    print(f"n={n:5d}  median risk {res.median_risk[n]:.4g}  [{res.q25[n]:.4g}, {res.q75[n]:.4g}]")
print(f"fitted slope {res.slope:.3f}, theory {res.theory_slope:.3f}, r^2 {res.r_squared:.3f}")
