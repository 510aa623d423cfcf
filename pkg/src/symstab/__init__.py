"""Gaussian noise stability of symmetric sets.

Hermite-Fourier coefficients of indicator sets, the Ornstein-Uhlenbeck
operator, the quadratic functional ``F``, second variations of balls with the
``r^2 = n + 2`` phase transition, and the two-dimensional counterexamples.
"""
from .gaussian_core import (
    BallSpec,
    ScaledRadius,
    GammaExpansionBounds,
    EdgeworthTerms,
    gaussian_measure_ball,
    radius_for_measure,
    sphere_volume,
    sphere_volume_wallis,
    wallis_integral,
    double_factorial,
    second_moment_defect_ball,
    gamma_expansion_bounds,
    gamma_half_expansion,
    edgeworth_ball_measure,
)
from .hermite import (
    ExponentialTilt,
    hermite_1d,
    hermite_nd,
    hermite_norm,
    hermite_growth_bound,
    hermite_interval_integral,
    multi_indices,
)
from .sets import (
    SymmetricSet,
    Ball,
    BallComplement,
    Strip,
    Ellipse2D,
    IntervalUnion1D,
    StarShaped2D,
    FourierTable,
    full_space,
    set_measure,
    fourier_coefficient,
    fourier_table,
    defect_vector,
    cross_moment,
    parse_set,
    random_interval_union,
)
from .noise import (
    Correlation,
    StabilityEstimate,
    LevelSetReport,
    t_rho_apply,
    t_rho_direct,
    stability_series,
    stability_mc,
    second_derivative_at_zero,
    functional_F,
    quadratic_remainder,
    t_rho_derivative_1d,
    level_set_check,
    rearrangement_deficit,
)
from .variation import (
    NormalPerturbation,
    FlowSpec,
    VariationReport,
    GaussianProductKernel,
    MehlerKernel,
    QuadraticDefectKernel,
    sphere_moment,
    poincare_ratio,
    measure_variation,
    second_variation_F,
    second_variation_noise,
    general_second_variation,
    phase_classify,
)

__version__ = "0.1.0"
