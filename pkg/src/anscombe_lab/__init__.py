"""Convergence-defect indices for randomly indexed sequences.

Estimates and exactly computes the weak-convergence defect, the
in-probability defect and the Anscombe oscillation index of random
sequences, and checks the inequality bounding the weak defect of a randomly
indexed sequence by the sum of the other three.
"""

from .distributions import (
    FiniteDistribution,
    Normal,
    PointMass,
    RngStream,
    exact_prob,
    normal_cdf,
    rademacher,
    uniform_finite,
)
from .indices import (
    EstimatorGrid,
    IndexEstimate,
    InequalityReport,
    Scenario,
    chi_ansc,
    infimum_over_kn,
    lambda_p_ratio,
    lambda_w,
    verify_inequality,
    window_bounds,
    window_exceedance,
)
from .metric_space import (
    Box,
    DiscreteSpace,
    EuclideanSpace,
    FinitePoints,
    HalfLine,
    HalfLines,
    HatFunction,
    IntervalUnion,
    IntervalUnions,
    SupportSubsets,
)
from .processes import (
    Alternating,
    BlockGrowth,
    BlockOscillating,
    Constant,
    DeterministicIndex,
    EventuallyConstant,
    ExplicitKn,
    LinearKn,
    LinearNoise,
    PartialSumNormalized,
    TwoPoint,
    UniformWindow,
)

__version__ = "0.1.0"
