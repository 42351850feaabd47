"""diffeolab: a numerical laboratory for diffeomorphism actions on sampled fields.

Build charts and sampled fields, construct compactly supported
diffeomorphisms with certified Jacobians, transport fields through them, and
measure which candidate operators commute with the transport.
"""

__version__ = "0.1.0"

from .backend import USING_NUMBA, backend_name
from .geometry import (
    ChartDomain,
    MetricField,
    VolumeDensity,
    diagonal_metric,
    grid_points,
    make_box,
    make_torus,
    metric_norm,
    total_volume,
    unit_torus,
)
from .fields import (
    BallRegion,
    SampledScalarField,
    SampledVectorField,
    eval_field,
    field_axpy,
    field_to_csv,
    lp_norm,
    lp_norm_scalar,
    lp_norm_vector,
    load_field,
    make_bump,
    make_vector_bump,
    mask_field,
    sample_scalar,
    sample_vector,
    save_field,
)
from .profiles import TransitionProfile, bump, smooth_step
from .diffeo import (
    Diffeo,
    compose,
    flowbox_straighten,
    identity,
    make_contraction,
    make_point_transport,
    make_rotation_conjugation,
    make_stretch,
    make_translation,
    perturb_away_from_zero,
    rotation_matrix_2d,
    straightening_residual,
)
from .transport import (
    NormEstimate,
    TransportResult,
    check_contravariance,
    operator_norm_estimate,
    pullback,
    pullback_scalar,
    pullback_vector,
)
from .operators import (
    OperatorSpec,
    apply,
    exp_phase,
    gaussian_blur,
    lipschitz_estimate,
    local_average,
    m_zero_image,
    pointwise_scalar,
    scalar_multiple,
    sqrt_pointwise,
    sup_operator,
    vector_gain,
)
from .analysis import (
    DecayCurve,
    DefectReport,
    RotationFit,
    SuiteVerdict,
    VitaliResult,
    constant_image_check,
    contraction_decay_test,
    disjoint_union_check,
    equivariance_defect,
    falsification_suite_scalar,
    falsification_suite_vector,
    inclusion_exclusion_reconstruct,
    localization_check,
    rotation_invariance_fit,
    vitali_approximate,
)
from .config import ExperimentConfig, default_config
