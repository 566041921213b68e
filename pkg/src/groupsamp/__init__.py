"""Group sampling and reconstruction of bandlimited graph signals."""

from .graphs import Laplacian, SparseGraph, build_laplacian, load_graph
from .groups import (
    GroupPartition,
    SampleDraw,
    SampleOperators,
    assemble_sample_operators,
    group_average,
    group_lift,
    piecewise_deviation,
    restrict,
    extend,
)
from .sampling import (
    CoherenceProfile,
    SamplingDistribution,
    coherence,
    draw_groups,
    estimate_frobenius_distribution,
    estimate_spectral_distribution,
    local_coherence_exact,
    optimal_distribution,
    sample_bound,
    total_variation,
    uniform_distribution,
)
from .spectral import (
    PolynomialFilter,
    SpectralBasis,
    apply_filter,
    dense_spectrum,
    estimate_eigcount,
    estimate_lambda_k,
    estimate_lambda_max,
    lowpass_filter,
)
from .reconstruct import (
    DecodeResult,
    SmoothnessFilter,
    build_reduced_laplacian,
    constrained_decode,
    constrained_fast_decode,
    constrained_full_decode,
    decode_error_bounds,
    fast_decode,
    full_decode,
    split_projections,
)
from .riplab import RipCurve, expectation_check, lower_rip_constant, rip_curve

__version__ = "0.1.0"
