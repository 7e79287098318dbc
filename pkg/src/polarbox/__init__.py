"""Polar-coded oriented bounding boxes.

A numpy library (plus CLI) covering the full desk-side pipeline around a
polar box parameterization: exact rotated geometry, encode/decode between
quads and several parameterizations, training-target grids, head losses
with analytic gradients, peak extraction and rotated NMS, DOTA-format I/O
with large-image tiling, OBB mAP evaluation, and a synthetic-optimization
harness comparing the parameterizations under gradient descent.
"""

from .codec import (
    EightParam,
    PolarCode,
    RepresentationKind,
    decode_polar,
    decode_variant,
    eight_to_quad,
    encode_polar,
    encode_variant,
    five_to_quad,
    normalized_rect,
    polar_angle_of,
    quad_to_eight,
    quad_to_five,
)
from .dataio import (
    Annotation,
    Window,
    merge_patch_detections,
    parse_dota_annotation,
    parse_dota_results,
    remap_annotations_to_window,
    split_windows,
    write_dota_results,
)
from .errors import (
    DegenerateGeometry,
    InvalidInput,
    NonConvexInput,
    NonFiniteDiameter,
    ParseError,
    PolarboxError,
)
from .evaluation import (
    ALL_POINTS,
    VOC07,
    EvalResult,
    average_precision,
    evaluate_obb_map,
    match_detections,
)
from .experiments import (
    ComparisonRow,
    FitTrace,
    boundary_case_pair,
    compare_representations,
    fit_representation,
    iou_angle_curve,
)
from .geometry import (
    RotatedRect,
    as_quad,
    canonicalize_quad,
    convex_intersection,
    iou_quad,
    min_area_rect,
    polygon_area,
    rect_to_quad,
    rotate_quad,
)
from .losses import center_focal_loss, masked_l1_loss, semantic_loss, total_loss
from .postprocess import (
    Detection,
    decode_detections,
    extract_peaks,
    fuse_center_semantic,
    rotated_nms,
)
from .targets import TargetMaps, build_targets, draw_gaussian, gaussian_radius

__version__ = "0.1.0"
