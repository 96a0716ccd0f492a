"""Error exponents and critical rates for distributed hypothesis testing
with quantize-and-binning schemes."""

from .bsds import (
    BsdsParams,
    ProductBsdsParams,
    RateSplit,
    bsds_critical_rate,
    bsds_exponent,
    product_bsds_critical_rate,
    product_bsds_exponent,
    sequential_critical_rate,
    sequential_exponent,
)
from .errors import (
    ConvergenceError,
    DHTError,
    GuardError,
    InfeasibleFamilyError,
    NotProductError,
    QuantizationConditionError,
    RateError,
    SupportError,
    ValidationError,
)
from .iprojection import LinearFamily, ProjectionResult, i_project, pythagorean_check, quantization_exponent
from .prob import (
    HypothesisPair,
    JointDistribution,
    TestChannel,
    binary_entropy,
    binary_kl,
    compose,
    conditional_entropy,
    entropy,
    kl_divergence,
    marginal,
    mutual_information,
)
from .sha import (
    CriticalRateBound,
    ExponentCurve,
    MergeMap,
    check_no_quantization_condition,
    critical_rate_bound_sha,
    lambda_hat,
    merge_map,
    sha_binning_curve,
    sha_binning_exponent,
    sha_quantize_binning_exponent,
)
from .simulator import SchemeConfig, SimulationResult, empirical_type, min_entropy_decode, simulate, simulate_sequential

__version__ = "0.1.0"
