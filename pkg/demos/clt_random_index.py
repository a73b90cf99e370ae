"""Normalized Rademacher walk stopped at a random time.

Prints the exact weak defect of S_n / sqrt(n) against N(0, 1) over half-lines
(from the binomial law), then Monte Carlo estimates of the same defect at a
random index N_n uniform on [n, 1.05 n], and the Anscombe index.

    python3 demos/clt_random_index.py
"""

import numpy as np

from anscombe_lab.distributions import Normal, RngStream, rademacher
from anscombe_lab.indices import EstimatorGrid, chi_ansc, lambda_w
from anscombe_lab.metric_space import HalfLines
from anscombe_lab.oracle import rademacher_walk_marginal
from anscombe_lab.processes import PartialSumNormalized, UniformWindow

walk = PartialSumNormalized(rademacher())
family = HalfLines(tuple(np.linspace(-3, 3, 61)))
grid = EstimatorGrid((0.5, 1.0), (0.02, 0.04), (1000, 1024), stride=8, samples=20_000)
rng = RngStream(7)

exact = max(
    law.prob(F) - Normal().prob(F)
    for law in map(rademacher_walk_marginal, grid.n_values)
    for F in family
)
print(f"exact weak defect, deterministic n: {exact:.4f}")

est = lambda_w(walk, Normal(), family, grid, rng.substream("w"), index_model=UniformWindow(0.05))
print(f"MC weak defect at random N_n:      {est.value:.4f} +/- {est.stderr:.4f}")

# the window maxima are the expensive part, so fewer paths here
chi_grid = EstimatorGrid((0.5, 1.0), (0.02, 0.04), (1000, 1024), stride=8, samples=4000)
chi = chi_ansc(walk, chi_grid, rng.substream("chi"))
print(f"Anscombe index:                    {chi.value:.4f} at {chi.argpoint}")
