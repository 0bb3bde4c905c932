"""How the projected kernel approaches the multivariate Gaussian kernel.

The imputation weight between two points is a geometric mean of B
one-dimensional Gaussian kernels on random directions.  Averaging the
squared projections estimates the squared distance, so the weight tends
to exp(-||d||^2 / (2 h^2)) as B grows.

    python3 demos/projection_kernel.py
"""

import numpy as np

from primeimpute import AvailabilityPattern, ProjectionSpec
from primeimpute.projection import log_geo_kernel, sample_directions

rng = np.random.default_rng(3)
pattern = AvailabilityPattern((0, 1, 2, 3, 4, 5))
u, w = rng.standard_normal(6), rng.standard_normal(6)
d = u - w
h = 2.0
exact = np.exp(-(d @ d) / (2 * h * h))
print(f"plain Gaussian weight: {exact:.5f}")

# %% one direction set per B, for three entry laws
for dist in ("gaussian", "uniform", "sparse"):
    row = []
    for b in (1, 10, 100, 1000, 10000):
        dirs = sample_directions(ProjectionSpec(b=b, dist=dist, seed=1), pattern)
        row.append(np.exp(log_geo_kernel(dirs, dirs.project(d[None])[0], h)))
    print(f"{dist:>8}: " + "  ".join(f"{v:.5f}" for v in row))

# %% spread over independent direction draws at B = 100
draws = []
for seed in range(200):
    dirs = sample_directions(ProjectionSpec(b=100, seed=seed), pattern)
    draws.append(np.exp(log_geo_kernel(dirs, dirs.project(d[None])[0], h)))
print(f"\nB=100 over 200 draws: mean {np.mean(draws):.5f}, sd {np.std(draws):.5f}")
