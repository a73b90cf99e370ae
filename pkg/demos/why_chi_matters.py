"""Why the Anscombe term cannot be dropped.

The path 0, 1, 0, 1, ... is only ever looked at at even n, where it sits at 0
and matches the target exactly.  A random index spread over a 5% window lands
on an odd n half the time, so the randomly indexed sequence is badly off.
Neither the weak defect at even n nor the in-probability defect of N_n / n
sees this.  Only the oscillation index does.

    python3 demos/why_chi_matters.py
"""

from anscombe_lab.distributions import PointMass
from anscombe_lab.indices import EstimatorGrid, Scenario, verify_inequality
from anscombe_lab.metric_space import HalfLines
from anscombe_lab.processes import Alternating, LinearKn, UniformWindow

scenario = Scenario(
    Alternating(0.0, 1.0),
    UniformWindow(0.05),
    PointMass(0.0),
    HalfLines((0.75,)),
    (LinearKn(1.0), LinearKn(1.05)),
    EstimatorGrid((0.25, 0.5), (0.05, 0.1), (100, 140), stride=2, samples=20_000),
    seed=20261019,
)

rep = verify_inequality(scenario)
print(f"left side  lambda_w(xi_N)      = {rep.lhs.value:.4f}")
print(f"weak defect of xi_n            = {rep.rhs_weak.value:.4f}")
print(f"in-probability defect (k_n={rep.kn.c:g}n) = {rep.rhs_lp.value:.4f}")
print(f"Anscombe index                 = {rep.rhs_chi.value:.4f}")
print(f"slack                          = {rep.slack['total']:.4f}")
print(f"inequality holds: {rep.passed}")
without = rep.rhs_weak.value + rep.rhs_lp.value + rep.slack["total"]
print(f"without the Anscombe term the right side would be {without:.4f} < {rep.lhs.value:.4f}")
