"""Luxemburg norms on Orlicz and modular sequence spaces, inequality
certificates, and searches for isometric images of small metric spaces."""

__version__ = "0.1.0"

from .certificates import (
    ClarksonReport,
    MidpointSearch,
    MidpointWitness,
    ObstructionCertificate,
    block_pair,
    certify,
    clarkson_check,
    find_midpoints,
    james_objective,
    midpoint_witness,
    obstruction_certificate_p_gt_2,
    obstruction_certificate_p_lt_2,
    strict_convexity_gap,
)
from .construct import (
    CriterionReport,
    GeometricThresholds,
    IsoCriterionParams,
    check_iso_criterion,
    construct_exponents,
    constructed_space,
    default_params,
)
from .embedding import (
    DistanceMatrix,
    EmbedResult,
    FiniteMetricEmbedder,
    PointConfig,
    ResidualResult,
    config_U,
    config_V,
    distortion,
    frechet_embed,
    isometry_residuals,
    minimize_isometry_residual,
    optimize_embedding,
    pairwise_distances,
)
from .exceptions import (
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    InvalidInputError,
    NormlabError,
    UnsupportedFamilyError,
)
from .spaces import (
    ExponentRule,
    FamilyKind,
    FiniteVector,
    LuxemburgNorm,
    ModularFamily,
    SpaceSpec,
    conjugate_index,
    distance,
    lp_norm,
    luxemburg_norm,
    luxemburg_norms,
    modular_sum,
    parse_space,
)
