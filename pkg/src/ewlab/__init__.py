"""Empirical and limiting distributions of real additive arithmetic functions."""

from ._validation import (
    EmptyTableError,
    InfeasibleParametersError,
    InsufficientDecayError,
    InvalidInputError,
    UndefinedDistributionError,
)
from .estimators import AdditiveFunctionTransformer
from .function_model import (
    AdditiveFunctionSpec,
    Family,
    additive_value,
    classify,
    companions,
    format_spec,
    h_factor,
    make_spec,
    parse_spec,
)
from .functionals import (
    B_f,
    ConstantsLedger,
    MeanValueParams,
    alpha_beta,
    check_thm21_conditions,
    eta,
    predicted_mean_value,
    predicted_pik,
    rate_thm11,
    published_params,
    select_params_thm12,
    select_params_thm13,
    sigma_f,
)
from .harness import (
    DistanceReport,
    LevelSetReport,
    convergence_sweep,
    kolmogorov_distance,
    levelset_consistency,
    levelset_sweep,
    verify_mean_value,
    verify_pik_asymptotic,
)
from .limit_law import (
    AtomicLimitLaw,
    CharacteristicFunction,
    InvertedLimitLaw,
    atomic_law,
    cf_conditional,
    cf_limit,
    concentration_integral,
    concentration_kr,
    invert_cf,
)
from .sieve import EmpiricalCdf, SieveTable, build_sieve, empirical_cdf, levelset_cdf, pi_k

__version__ = "0.1.0"
