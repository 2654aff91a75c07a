"""Constructive truncated power series with universal radial behaviour,
plus the boundary-growth and Taylor-expansion diagnostics to measure them."""

from .numerics import (
    CNum,
    CertificationError,
    PartialSumTrace,
    Poly,
    PrecisionContext,
    PrecisionExhaustedError,
    abel_identity_residual,
    auto_bits,
    cauchy_coefficient_bounds,
    dilate,
    eval_poly,
    partial_sums_at,
)
from .geometry import (
    Arc,
    CompactTarget,
    RadialSegment,
    SampleGrid,
    StolzAngle,
    arc_measure,
    harmonic_majorant,
    poisson_kernel,
    sample,
    stolz_contains,
)
from .approximation import (
    ApproxCertificate,
    ApproximationError,
    PieceTarget,
    SequenceSpec,
    approximate,
    tail_index,
    uniform_dilation_radius,
)
from .constructors import (
    CoefficientFloor,
    ConstructionAborted,
    ConstructionState,
    DivergenceLedger,
    GrowthEnvelope,
    RadiiSequence,
    StagePolicy,
    StageReport,
    TargetEnrollment,
    choose_divergence_coefficient,
    construct_ae_divergent,
    construct_coefficient_floor,
    construct_growth_restricted,
    construct_pointwise_divergent,
    lem1_shift,
)
from .diagnostics import (
    CoverageReport,
    DivergenceProfile,
    GapWitness,
    GrowthReport,
    bloch_norm_estimate,
    dilate_density_check,
    gap_witnesses,
    growth_metrics,
    normality_scan,
    partial_sum_divergence_profile,
    picard_coverage,
    radial_cluster_sample,
    two_radii_bound_check,
)
from .capacity import (
    AnnulusSpec,
    CapacityEstimate,
    PointCloud,
    capacity_estimate,
    disc_cloud,
    segment_cloud,
    sublevel_capacity_curve,
)

__version__ = "0.1.0"
