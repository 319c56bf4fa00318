"""Monocular 3D detection toolkit.

Evaluation with a depth-aware similarity metric, KITTI label / calibration /
point-cloud IO, monocular box decoding, LiDAR-derived instance mask labels,
and reference loss functions with analytic gradients.
"""
from .errors import (EvaluationError, FormatError, GeometryError, Mono3DError,
                     ValidationError)
from .evaluation import (DIFFICULTIES, EvalConfig, GtStatus, MatchResult,
                         MetricCell, MetricReport, OcclusionCell, ads,
                         ads_from_matches, aos, average_precision,
                         default_iou_threshold, difficulty_filter,
                         evaluate_dirs, evaluate_frames, match_frame,
                         occlusion_split, render_table, result_sampling,
                         score_thresholds, write_report)
from .geom3d import (Box3D, bev_polygon, box_corners, contains_point,
                     convex_intersection_area, iou_2d, iou_2d_matrix, iou_3d,
                     iou_bev, local_to_global_yaw, polygon_area,
                     project_to_image, wrap_angle)
from .kitti_io import (CalibrationSet, ObjectLabel, PointCloud,
                       parse_calib_file, parse_label_file, parse_label_line,
                       parse_velodyne, read_calib_directory,
                       read_label_directory, velo_to_rect, write_label_file,
                       write_label_line)
from .losses import (dim_loss, focal_loss, giou, giou_loss,
                     laplacian_depth_loss, multibin_loss, seg_loss)
from .mono_decode import (DEFAULT_MEAN_DIMS, BoxObservations, DecoderConfig,
                          DepthEstimate, KeypointSet, assemble_box,
                          backproject, bin_center, bin_of, decode_center,
                          decode_dimensions, depth_from_line,
                          encode_observations, fuse_depths, group_line_depths,
                          line_pixel_heights, multibin_decode, multibin_encode,
                          project_box_2d)
from .shape_labels import (DEFAULT_GRID_SIZE, MaskGrid, center_sampling,
                           generate_mask, parse_mask, position_embedding,
                           write_mask)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
