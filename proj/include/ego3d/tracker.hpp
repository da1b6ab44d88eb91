#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "ego3d/geometry.hpp"

namespace ego3d {

/// Linear Kalman filter, dimensions fixed at construction. Covariances are
/// re-symmetrized every step; updates use the Joseph form.
class KalmanFilter {
 public:
  KalmanFilter(Eigen::VectorXd x0, Eigen::MatrixXd p0);

  void predict(const Eigen::MatrixXd& f, const Eigen::MatrixXd& q);
  /// Throws SingularInnovation when S = H P H' + R is not invertible.
  void update(const Eigen::VectorXd& z, const Eigen::MatrixXd& h, const Eigen::MatrixXd& r);

  const Eigen::VectorXd& state() const { return x_; }
  const Eigen::MatrixXd& covariance() const { return p_; }

 private:
  Eigen::VectorXd x_;
  Eigen::MatrixXd p_;
};

/// Constant-velocity bbox filter over [u, v, s, r, du, dv, ds]
/// (center, area, aspect ratio; r has no velocity). SORT-style covariances.
class BboxKalman {
 public:
  explicit BboxKalman(const Bbox& first);

  void predict(double dt);
  void update(const Bbox& measurement);
  Bbox predicted_bbox() const;

  const KalmanFilter& filter() const { return kf_; }

 private:
  KalmanFilter kf_;
};

/// Constant-velocity world-point filter over [x, y, z, dx, dy, dz].
class PointKalman {
 public:
  explicit PointKalman(const Eigen::Vector3d& first, double measurement_std = 0.25,
                       double accel_std = 1.0);

  void predict(double dt);
  void update(const Eigen::Vector3d& measurement);
  Eigen::Vector3d predicted_point() const { return kf_.state().head<3>(); }

  const KalmanFilter& filter() const { return kf_; }

 private:
  KalmanFilter kf_;
  double measurement_std_;
  double accel_std_;
};

struct DetectionInput {
  Bbox bbox;
  double score = 1.0;
  std::optional<Eigen::Vector3d> root_cam;  // camera-frame 3D root

  void validate() const;  // x2 > x1, y2 > y1
};

enum class TrackStatus { Tentative, Confirmed, Dead };

struct Track {
  int id = 0;
  BboxKalman kf2d;
  std::optional<PointKalman> kf3d;  // present once a 3D root has been seen
  int hits = 1;
  int age = 1;
  int time_since_update = 0;
  TrackStatus status = TrackStatus::Tentative;

  Track(int track_id, const DetectionInput& det, const std::optional<Eigen::Vector3d>& world_root);
};

struct AssociationConfig {
  double alpha = 0.3;        // IoU weight; (1 - alpha) weights the 3D term
  double dist_scale = 2.0;   // meters; 3D distance saturates at 1 here
  double gate_iou = 0.1;
  double gate_dist = 3.0;    // meters
  int max_age = 30;          // frames without update before a track dies
  int min_hits = 3;          // hits before a track is confirmed
  double score_threshold = 0.5;  // minimum detection score to spawn a track

  void validate() const;
};

/// Camera-frame point to world coordinates (inverse of the camera-from-world
/// pose).
Eigen::Vector3d to_world(const Eigen::Vector3d& root_cam, const RigidPose& cam_pose);

/// alpha * (1 - IoU) + (1 - alpha) * min(dist / dist_scale, 1); pure-IoU
/// fallback when either side lacks a 3D root. Returns +infinity (non-match)
/// when the IoU gate and the distance gate both fail.
double association_cost(const Bbox& predicted_bbox,
                        const std::optional<Eigen::Vector3d>& predicted_root,
                        const Bbox& det_bbox,
                        const std::optional<Eigen::Vector3d>& det_world_root,
                        const AssociationConfig& cfg);

struct TrackOutput {
  int id = 0;
  Bbox bbox;
  double score = 1.0;
  std::optional<Eigen::Vector3d> world_root;
};

/// Tracking-by-detection over one camera stream: paired 2D/3D constant-
/// velocity filters, Hungarian assignment on the combined cost, SORT-style
/// lifecycle. Not safe for concurrent mutation; one instance per stream.
class MultiObjectTracker {
 public:
  explicit MultiObjectTracker(AssociationConfig cfg = {});

  /// Advances one frame. Detection roots are transformed into the world
  /// frame through cam_pose before association and filtering.
  std::vector<TrackOutput> step(const std::vector<DetectionInput>& detections,
                                const RigidPose& cam_pose, double dt);

  const std::vector<Track>& tracks() const { return tracks_; }
  const AssociationConfig& config() const { return cfg_; }

 private:
  AssociationConfig cfg_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  int frame_count_ = 0;
};

/// Per-pixel depth image, row-major (height x width).
struct DepthMap {
  Eigen::MatrixXd values;

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }
};

/// Mean depth over the bbox interior (times `scale`), back-projected at the
/// bbox center. Throws EmptyBbox when no pixel falls inside.
Eigen::Vector3d simple_baseline_root(const Bbox& bbox, const DepthMap& depth,
                                     const CameraIntrinsics& intrinsics,
                                     double scale = 1.0);

}  // namespace ego3d
