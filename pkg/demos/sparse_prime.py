"""Sparse fits when most coefficients are zero (the third scenario).

Thirty covariates, twelve of them active.  SPRIME imputes with projected
kernels, then runs a cross-validated LASSO on the imputed design; the
penalized complete-case fit (SCC) sees only the complete rows.

    python3 demos/sparse_prime.py
"""

import numpy as np

from primeimpute import ImputeConfig, PenaltySpec, fit_cc, fit_sprime
from primeimpute.simgen import gen_scenario, replication_seed, scenario3

cfg = scenario3(seed=5)
beta0 = np.array(cfg.beta0)
print(f"{'rep':>3} {'lambda':>8} {'active':>6} {'false+':>6} {'MSE sprime':>10} {'MSE scc':>8}")
for r in range(8):
    ds, _ = gen_scenario(cfg, r)
    seed = replication_seed(cfg.seed, r)
    res, rep = fit_sprime(ds, ImputeConfig(), PenaltySpec(), seed=seed)
    scc = fit_cc(ds, PenaltySpec(), seed=seed)
    false_pos = sum(1 for j in rep.active_set if beta0[j] == 0)
    print(f"{r:>3} {rep.lambda_chosen:8.4f} {len(rep.active_set):6d} {false_pos:6d} "
          f"{np.mean((res.beta - beta0) ** 2):10.4f} {np.mean((scc - beta0) ** 2):8.4f}")

# %% the solution is certified by its optimality conditions
print("\nKKT check of the last fit:", rep.kkt)
