#pragma once

#include <Eigen/Core>
#include <vector>

#include "ego3d/errors.hpp"
#include "ego3d/optimize.hpp"

namespace ego3d {

/// World-frame joint trajectory, T frames of J x 3 positions in meters, with
/// a per-entry validity mask.
struct PoseTrajectory3D {
  std::vector<Eigen::MatrixX3d> frames;
  std::vector<std::vector<bool>> valid;
  double fps = 20.0;

  int num_frames() const { return static_cast<int>(frames.size()); }
  int num_joints() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }

  static PoseTrajectory3D all_valid(std::vector<Eigen::MatrixX3d> frames, double fps = 20.0);
  bool same_shape_and_mask(const PoseTrajectory3D& other) const;
};

/// Limb index pairs (start, end) plus left/right limb pairings for the
/// symmetry loss. Pair entries index into `limbs`.
struct LimbTopology {
  std::vector<std::pair<int, int>> limbs;
  std::vector<std::pair<int, int>> left_right_pairs;

  void validate(int num_joints) const;
};

/// 17-keypoint COCO topology: 12 limbs in 6 left/right pairs.
const LimbTopology& coco17_topology();

struct RefineWeights {
  double limb = 1.0;
  double symm = 1.0;
  double temporal = 0.5;
  double reg = 0.1;
};

struct PoseLossBreakdown {
  double total = 0.0;
  double limb = 0.0;
  double symm = 0.0;
  double temporal = 0.0;
  double reg = 0.0;
};

/// Per-limb Euclidean lengths of one pose.
Eigen::VectorXd limb_lengths(const Eigen::MatrixX3d& pose, const LimbTopology& topo);

/// Mask-checked variant: throws InvalidJoint when a referenced joint of
/// frame t is masked invalid.
Eigen::VectorXd limb_lengths(const PoseTrajectory3D& traj, int t, const LimbTopology& topo);

/// Trajectory objective: total = w_l*limb + w_s*symm + w_t*temporal + w_i*reg
/// with limb = sum_t |lambda_{t+1} - lambda_t|, symm = sum_t |lambda_left -
/// lambda_right|, temporal = sum_t |y_{t+1} - y_t|, reg = sum_t |y_t - init_t|
/// (norms over the stacked difference vectors). The reg anchor skips entries
/// masked invalid; the other terms use values as stored. eps > 0 replaces
/// every norm by sqrt(|v|^2 + eps^2) so the objective stays differentiable.
PoseLossBreakdown loss_pose3d(const PoseTrajectory3D& traj, const PoseTrajectory3D& init,
                              const LimbTopology& topo, const RefineWeights& w,
                              double eps = 0.0);

/// Same objective with its analytic gradient (same layout as traj.frames).
PoseLossBreakdown loss_pose3d_gradient(const PoseTrajectory3D& traj,
                                       const PoseTrajectory3D& init,
                                       const LimbTopology& topo, const RefineWeights& w,
                                       double eps, std::vector<Eigen::MatrixX3d>& grad);

/// Fills masked-invalid joints by per-joint temporal interpolation (flat
/// extrapolation at the ends). Joints never observed fall back to the frame
/// centroid of valid joints.
PoseTrajectory3D interpolate_invalid(const PoseTrajectory3D& traj);

/// Gradient-based minimization of loss_pose3d starting from traj_init.
/// Invalid joints are free variables initialized by interpolation; the reg
/// term never anchors to them. The returned trajectory is fully valid.
PoseTrajectory3D refine(const PoseTrajectory3D& traj_init, const LimbTopology& topo,
                        const RefineWeights& w, const OptimizeConfig& cfg = {});

}  // namespace ego3d
