"""cornerpose: 6D object pose from trihedral corner detections.

The pipeline: extract corners from a CAD mesh, attach 7 virtual control
points to each, enumerate corner/detection/relabeling hypotheses, solve
each with DLT + damped Gauss-Newton PnP, gate by inliers, and keep the
best-scoring candidate (reprojection or rendered-edge correlation).
"""

from .corners import (
    INDEX_MAPS,
    CornerDetection,
    CornerModel,
    CornerSymmetry,
    apply_symmetry,
    compose_symmetries,
    control_points,
    symmetry_rotation,
)
from .estimator import (
    EstimatorConfig,
    InlierMatch,
    ObjectModel,
    ScoredPose,
    estimate,
    estimate_all,
    match_inliers,
    score_edge_ncc,
    score_reprojection,
)
from .geometry import (
    CameraIntrinsics,
    NonPositiveDepthError,
    Pose,
    compose,
    nearest_rotation,
    project,
    rotation_from_vector,
    rotation_geodesic_distance,
)
from .mesh import (
    CornerFrame,
    Mesh,
    ParseError,
    compute_diameter,
    extract_corners,
    parse_obj,
    parse_ply,
    weld_vertices,
)
from .metrics import (
    EvaluationRecord,
    EvaluationSummary,
    GroupSummary,
    add_metric,
    adi_metric,
    aggregate,
    detection_iou,
    evaluate_pose,
    metric_points,
    pose_correct,
    summary_to_csv,
)
from .pnp import (
    Correspondence,
    DegenerateConfigurationError,
    NumericalFailureError,
    TooFewPointsError,
    pnp_dlt,
    refine_pose,
    reprojection_residuals,
    reprojection_rmse,
)
from .render import (
    Raster,
    normalized_cross_correlation,
    pgm_bytes,
    render_edges,
    render_mask,
    write_pgm,
)
from .simulate import (
    NoiseModel,
    Scenario,
    make_rng,
    read_scenarios,
    sample_scenario,
    scenario_seed,
    simulate_detections,
    write_scenarios,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # geometry
    "Pose", "CameraIntrinsics", "NonPositiveDepthError", "compose",
    "nearest_rotation", "project", "rotation_from_vector",
    "rotation_geodesic_distance",
    # mesh
    "Mesh", "CornerFrame", "ParseError", "parse_obj", "parse_ply",
    "weld_vertices", "compute_diameter", "extract_corners",
    # corner models
    "CornerModel", "CornerDetection", "CornerSymmetry", "INDEX_MAPS",
    "control_points", "apply_symmetry", "compose_symmetries",
    "symmetry_rotation",
    # pnp
    "Correspondence", "pnp_dlt", "refine_pose", "reprojection_residuals",
    "reprojection_rmse", "TooFewPointsError", "DegenerateConfigurationError",
    "NumericalFailureError",
    # rendering
    "Raster", "render_edges", "render_mask",
    "normalized_cross_correlation", "pgm_bytes", "write_pgm",
    # estimation
    "ObjectModel", "EstimatorConfig", "ScoredPose", "InlierMatch",
    "estimate", "estimate_all", "match_inliers", "score_reprojection",
    "score_edge_ncc",
    # simulation
    "NoiseModel", "Scenario", "make_rng", "scenario_seed",
    "simulate_detections", "sample_scenario", "write_scenarios",
    "read_scenarios",
    # metrics
    "add_metric", "adi_metric", "pose_correct", "detection_iou",
    "metric_points", "EvaluationRecord", "GroupSummary",
    "EvaluationSummary", "evaluate_pose", "aggregate", "summary_to_csv",
]
