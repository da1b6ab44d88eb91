#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "ego3d/geometry.hpp"
#include "ego3d/optimize.hpp"
#include "ego3d/pose_refine.hpp"

namespace ego3d {

/// Root orientation (6D) + translation. The axis-angle + translation form
/// used by some producers converts losslessly through the helpers below.
struct BodyGlobal {
  Eigen::Matrix<double, 6, 1> rot6d = (Eigen::Matrix<double, 6, 1>() << 1, 0, 0, 0, 1, 0).finished();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static BodyGlobal from_axis_angle(const Eigen::Vector3d& axis_angle,
                                    const Eigen::Vector3d& translation);
  Eigen::Vector3d axis_angle() const;
};

/// Parametric body: 23 per-joint 6D rotations, 10 shape coefficients, root
/// orientation + translation. Pose row j-1 drives skeleton joint j.
struct BodyParams {
  Eigen::Matrix<double, 23, 6> pose;
  Eigen::Matrix<double, 10, 1> shape = Eigen::Matrix<double, 10, 1>::Zero();
  BodyGlobal global;

  static BodyParams rest();
};

/// 24-joint kinematic skeleton with a linear limb-length shape basis and a
/// linear joint -> keypoint regressor.
struct KinematicModel {
  static constexpr int kJoints = 24;

  std::array<int, kJoints> parents;                 // parents[0] == -1
  Eigen::Matrix<double, kJoints, 3> rest_offsets;   // from parent, rest frame
  Eigen::Matrix<double, 3 * kJoints, 10> shape_basis;  // row = joint*3 + axis
  Eigen::MatrixXd keypoint_regressor;               // J x 24, rows sum to 1

  int num_keypoints() const { return static_cast<int>(keypoint_regressor.rows()); }
  void validate() const;

  /// Parent-relative offsets for the given shape coefficients.
  Eigen::Matrix<double, kJoints, 3> shaped_offsets(const Eigen::Matrix<double, 10, 1>& shape) const;
  /// Rest-pose skeleton joints (identity pose/global, given shape).
  Eigen::Matrix<double, kJoints, 3> rest_joints(const Eigen::Matrix<double, 10, 1>& shape) const;
  /// Vertical extent of the zero-shape rest skeleton.
  double skeleton_height() const;

  /// Default human-proportioned skeleton with a COCO-17 regressor.
  static const KinematicModel& canonical();
};

/// Skeleton joints under the full parameter set.
Eigen::Matrix<double, KinematicModel::kJoints, 3> forward_kinematics_joints(
    const KinematicModel& model, const BodyParams& params);

/// Phi: body parameters -> J x 3 keypoints.
Eigen::MatrixX3d forward_kinematics(const KinematicModel& model, const BodyParams& params);

struct MeshFitWeights {
  double data = 1.0;
  double pose_norm = 1e-3;
  double limb = 0.1;
  double symm = 0.1;
  double temporal = 0.1;
  double shape_prior = 1e-3;
};

struct MeshLossBreakdown {
  double total = 0.0;
  double data = 0.0;        // sum_t |y_t - Phi(theta_t)|
  double pose_norm = 0.0;   // sum_t |theta_pose,t|
  double limb = 0.0;
  double symm = 0.0;
  double temporal = 0.0;
  double shape_prior = 0.0;  // 0.5 |theta_shape|^2
};

/// Sequence objective over one parameter set per target frame (shape shared:
/// frame 0's shape is used for every frame). Target entries masked invalid do
/// not contribute to the data term. eps smooths norms as in loss_pose3d.
MeshLossBreakdown loss_mesh_sequence(const KinematicModel& model,
                                     const std::vector<BodyParams>& params,
                                     const PoseTrajectory3D& target,
                                     const MeshFitWeights& w, const LimbTopology& topo,
                                     double eps = 0.0);

/// Single-frame convenience (temporal and limb terms vanish for T = 1).
MeshLossBreakdown loss_mesh(const KinematicModel& model, const BodyParams& params,
                            const Eigen::MatrixX3d& target, const MeshFitWeights& w,
                            const LimbTopology& topo, double eps = 0.0);

/// Derivative of loss_mesh_sequence wrt every parameter block.
struct MeshLossGradient {
  std::vector<Eigen::Matrix<double, 23, 6>> pose;
  std::vector<Eigen::Matrix<double, 6, 1>> global_rot6d;
  std::vector<Eigen::Vector3d> global_translation;
  Eigen::Matrix<double, 10, 1> shape = Eigen::Matrix<double, 10, 1>::Zero();
};

MeshLossBreakdown loss_mesh_sequence_gradient(const KinematicModel& model,
                                              const std::vector<BodyParams>& params,
                                              const PoseTrajectory3D& target,
                                              const MeshFitWeights& w,
                                              const LimbTopology& topo, double eps,
                                              MeshLossGradient& grad);

struct FitResult {
  std::vector<BodyParams> params;  // one per target frame, shared shape
  double final_loss = 0.0;
  std::array<double, 3> stage_losses = {0.0, 0.0, 0.0};
  // Parameter snapshots taken after each stage; stage_params[2] == params.
  std::array<std::vector<BodyParams>, 3> stage_params;
};

/// Three-stage fit: (1) global only, (2) shape only, (3) pose + global.
/// Blocks outside the active stage are left bit-identical. The init is
/// broadcast to every frame; when the caller has nothing better, rest pose at
/// the target centroid is a reasonable start (see rest_init_for_target).
FitResult fit_three_stage(const KinematicModel& model, const BodyParams& init,
                          const PoseTrajectory3D& target, const MeshFitWeights& w,
                          const LimbTopology& topo, const OptimizeConfig& cfg = {});

/// Rest pose translated so the rest keypoint centroid lands on the centroid
/// of the valid target keypoints.
BodyParams rest_init_for_target(const KinematicModel& model, const PoseTrajectory3D& target);

}  // namespace ego3d
