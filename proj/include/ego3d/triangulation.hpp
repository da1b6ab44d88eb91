#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ego3d/geometry.hpp"

namespace ego3d {

/// One 2D keypoint measurement from a named camera.
struct Observation2D {
  std::string camera_id;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  double confidence = 1.0;
};

struct TriangulationResult {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  std::vector<std::string> inliers;  // camera ids, sorted
  double mean_reprojection_error = 0.0;
};

struct RansacConfig {
  int max_iterations = 100;
  double inlier_threshold = 10.0;  // pixels
  int min_inliers = 2;
  std::uint64_t rng_seed = 0;
  /// Observations below this confidence are dropped before triangulation.
  double min_confidence = 0.1;

  void validate() const;
};

using CameraMap = std::map<std::string, ProjectionMatrix>;

/// Unweighted DLT: solves A y~ = 0 over the stacked cross-product rows of all
/// observations, A in R^{2C x 4}, via SVD. Each projection matrix is
/// normalized first, so the result is invariant to positive rescaling of any
/// P_c. Throws InsufficientViews (< 2 distinct cameras) and DegenerateGeometry
/// (rank-deficient system or coincident camera centers).
Eigen::Vector3d dlt_triangulate(const std::vector<Observation2D>& obs,
                                const CameraMap& cams);

/// RANSAC over minimal 2-view samples; inliers by reprojection error, final
/// point re-estimated by DLT on the winning inlier set. Deterministic in
/// cfg.rng_seed. Throws NoConsensus when no hypothesis reaches min_inliers.
TriangulationResult ransac_triangulate(const std::vector<Observation2D>& obs,
                                       const CameraMap& cams,
                                       const RansacConfig& cfg);

/// Per-camera 2D keypoints for one frame: J rows of (u, v) plus confidences.
struct KeypointSet {
  Eigen::MatrixX2d points;     // J x 2
  Eigen::VectorXd confidence;  // J
};

struct PoseTriangulation {
  Eigen::MatrixX3d joints;  // J x 3, rows undefined where !valid
  std::vector<bool> valid;
  std::vector<std::optional<TriangulationResult>> details;
};

/// Independent per-joint RANSAC triangulation. Joints that fail to reach
/// consensus are flagged invalid; throws InsufficientViews only when no joint
/// triangulates at all.
PoseTriangulation triangulate_pose(const std::map<std::string, KeypointSet>& keypoints,
                                   const CameraMap& cams, const RansacConfig& cfg);

}  // namespace ego3d
