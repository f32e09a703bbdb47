"""Bergman kernels and weighted extremal functions on the Riemann sphere."""

__version__ = "0.1.0"

from .errors import (
    BergmanError,
    ConfigurationError,
    DimensionError,
    IllConditionedError,
    InvalidPointError,
    RankDeficiencyError,
    UnconvergedError,
    UnsupportedOracleError,
)
from .extremal import (
    ConvergenceReport,
    PhiSolveResult,
    SandwichRecord,
    bm_exponent,
    convergence_report,
    fit_rate,
    oracle_V,
    phi_log,
    phi_lp_oracle,
    sandwich_check,
)
from .geometry import (
    Chart,
    EvalGrid,
    ProjectivePoint,
    chordal_distance,
    fs_weight,
    make_eval_grid,
    section_norm_log,
)
from .kernel import (
    BergmanKernel,
    BernsteinMarkovEstimate,
    SectionSpaceBasis,
    bergman_log,
    bergman_log_many,
    bm_constant,
    gram_inner,
    orthonormalize,
    trace_mass,
)
from .measure import WeightedCompactSet, annulus_pair_set, circle_set, interval_set
from .scenarios import SCENARIOS, get_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
