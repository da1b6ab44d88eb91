#include "ego3d/pose_refine.hpp"

#include <cmath>

namespace ego3d {

namespace {

double smoothed_norm(double sq, double eps) { return std::sqrt(sq + eps * eps); }

void check_finite_valid(const PoseTrajectory3D& traj) {
  for (int t = 0; t < traj.num_frames(); ++t)
    for (int j = 0; j < traj.num_joints(); ++j)
      if (traj.valid[t][j] && !traj.frames[t].row(j).allFinite())
        throw Error(ErrorCode::NonFiniteLoss, "trajectory has non-finite valid entries");
}

}  // namespace

PoseTrajectory3D PoseTrajectory3D::all_valid(std::vector<Eigen::MatrixX3d> frames,
                                             double fps) {
  PoseTrajectory3D out;
  out.fps = fps;
  out.frames = std::move(frames);
  const int joints = out.num_joints();
  out.valid.assign(out.frames.size(), std::vector<bool>(joints, true));
  return out;
}

bool PoseTrajectory3D::same_shape_and_mask(const PoseTrajectory3D& other) const {
  return num_frames() == other.num_frames() && num_joints() == other.num_joints() &&
         valid == other.valid;
}

void LimbTopology::validate(int num_joints) const {
  for (const auto& [s, e] : limbs)
    if (s < 0 || e < 0 || s >= num_joints || e >= num_joints)
      throw Error(ErrorCode::InvalidConfig, "limb joint index out of range");
  for (const auto& [l, r] : left_right_pairs) {
    const int n = static_cast<int>(limbs.size());
    if (l < 0 || r < 0 || l >= n || r >= n || l == r)
      throw Error(ErrorCode::InvalidConfig, "left/right pair must reference distinct limbs");
  }
}

const LimbTopology& coco17_topology() {
  // 0 nose, 1/2 eyes, 3/4 ears, 5/6 shoulders, 7/8 elbows, 9/10 wrists,
  // 11/12 hips, 13/14 knees, 15/16 ankles.
  static const LimbTopology topo = [] {
    LimbTopology t;
    t.limbs = {
        {5, 7},  {6, 8},    // upper arms
        {7, 9},  {8, 10},   // forearms
        {11, 13}, {12, 14}, // thighs
        {13, 15}, {14, 16}, // shins
        {5, 11}, {6, 12},   // torso sides
        {1, 3},  {2, 4},    // eye-ear
    };
    t.left_right_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}};
    return t;
  }();
  return topo;
}

Eigen::VectorXd limb_lengths(const Eigen::MatrixX3d& pose, const LimbTopology& topo) {
  topo.validate(static_cast<int>(pose.rows()));
  Eigen::VectorXd out(topo.limbs.size());
  for (std::size_t l = 0; l < topo.limbs.size(); ++l)
    out(static_cast<Eigen::Index>(l)) =
        (pose.row(topo.limbs[l].first) - pose.row(topo.limbs[l].second)).norm();
  return out;
}

Eigen::VectorXd limb_lengths(const PoseTrajectory3D& traj, int t, const LimbTopology& topo) {
  if (t < 0 || t >= traj.num_frames())
    throw Error(ErrorCode::OutOfRange, "frame index out of range");
  for (const auto& [s, e] : topo.limbs)
    if (!traj.valid[t][s] || !traj.valid[t][e])
      throw Error(ErrorCode::InvalidJoint, "limb references an invalid joint");
  return limb_lengths(traj.frames[t], topo);
}

namespace {

// Smoothed limb-length vectors for every frame plus the per-limb difference
// directions needed by the chain rule.
struct LimbCache {
  Eigen::MatrixXd lengths;                // T x L (smoothed)
  std::vector<Eigen::MatrixX3d> deltas;   // per frame: L x 3 (start - end)
};

LimbCache limb_cache(const PoseTrajectory3D& traj, const LimbTopology& topo, double eps) {
  const int frame_count = traj.num_frames();
  const auto limb_count = static_cast<Eigen::Index>(topo.limbs.size());
  LimbCache cache;
  cache.lengths.resize(frame_count, limb_count);
  cache.deltas.reserve(frame_count);
  for (int t = 0; t < frame_count; ++t) {
    Eigen::MatrixX3d d(limb_count, 3);
    for (Eigen::Index l = 0; l < limb_count; ++l) {
      const auto& [s, e] = topo.limbs[static_cast<std::size_t>(l)];
      d.row(l) = traj.frames[t].row(s) - traj.frames[t].row(e);
      cache.lengths(t, l) = smoothed_norm(d.row(l).squaredNorm(), eps);
    }
    cache.deltas.push_back(std::move(d));
  }
  return cache;
}

PoseLossBreakdown loss_impl(const PoseTrajectory3D& traj, const PoseTrajectory3D& init,
                            const LimbTopology& topo, const RefineWeights& w, double eps,
                            std::vector<Eigen::MatrixX3d>* grad) {
  if (!traj.same_shape_and_mask(init))
    throw Error(ErrorCode::ShapeMismatch, "trajectory and init differ in shape or mask");
  topo.validate(traj.num_joints());

  const int frame_count = traj.num_frames();
  const int joint_count = traj.num_joints();
  const auto limb_count = static_cast<Eigen::Index>(topo.limbs.size());
  const LimbCache cache = limb_cache(traj, topo, eps);

  PoseLossBreakdown out;
  if (grad) {
    grad->assign(static_cast<std::size_t>(frame_count),
                 Eigen::MatrixX3d::Zero(joint_count, 3));
  }
  // Gradient wrt the smoothed limb lengths; mapped back to joints at the end.
  Eigen::MatrixXd g_lambda = Eigen::MatrixXd::Zero(frame_count, limb_count);

  // limb: sum_t |lambda_{t+1} - lambda_t|
  for (int t = 0; t + 1 < frame_count; ++t) {
    const Eigen::VectorXd d = cache.lengths.row(t + 1) - cache.lengths.row(t);
    const double n = smoothed_norm(d.squaredNorm(), eps);
    out.limb += n;
    if (grad && n > 0.0) {
      g_lambda.row(t + 1) += (w.limb / n) * d.transpose();
      g_lambda.row(t) -= (w.limb / n) * d.transpose();
    }
  }

  // symm: sum_t |lambda_left - lambda_right|
  const auto pair_count = static_cast<Eigen::Index>(topo.left_right_pairs.size());
  for (int t = 0; t < frame_count; ++t) {
    Eigen::VectorXd d(pair_count);
    for (Eigen::Index p = 0; p < pair_count; ++p) {
      const auto& [l, r] = topo.left_right_pairs[static_cast<std::size_t>(p)];
      d(p) = cache.lengths(t, l) - cache.lengths(t, r);
    }
    const double n = smoothed_norm(d.squaredNorm(), eps);
    out.symm += n;
    if (grad && n > 0.0) {
      for (Eigen::Index p = 0; p < pair_count; ++p) {
        const auto& [l, r] = topo.left_right_pairs[static_cast<std::size_t>(p)];
        g_lambda(t, l) += w.symm * d(p) / n;
        g_lambda(t, r) -= w.symm * d(p) / n;
      }
    }
  }

  // temporal: sum_t |y_{t+1} - y_t| over stacked joints
  for (int t = 0; t + 1 < frame_count; ++t) {
    const Eigen::MatrixX3d d = traj.frames[t + 1] - traj.frames[t];
    const double n = smoothed_norm(d.squaredNorm(), eps);
    out.temporal += n;
    if (grad && n > 0.0) {
      (*grad)[t + 1] += (w.temporal / n) * d;
      (*grad)[t] -= (w.temporal / n) * d;
    }
  }

  // reg: sum_t |y_t - init_t| over entries still carrying a valid anchor
  for (int t = 0; t < frame_count; ++t) {
    Eigen::MatrixX3d d = traj.frames[t] - init.frames[t];
    for (int j = 0; j < joint_count; ++j)
      if (!traj.valid[t][j]) d.row(j).setZero();
    const double n = smoothed_norm(d.squaredNorm(), eps);
    out.reg += n;
    if (grad && n > 0.0) (*grad)[t] += (w.reg / n) * d;
  }

  // Chain rule through lambda = |y_start - y_end| (smoothed).
  if (grad) {
    for (int t = 0; t < frame_count; ++t)
      for (Eigen::Index l = 0; l < limb_count; ++l) {
        const double gl = g_lambda(t, l);
        if (gl == 0.0 || cache.lengths(t, l) == 0.0) continue;
        const auto& [s, e] = topo.limbs[static_cast<std::size_t>(l)];
        const Eigen::RowVector3d dir = cache.deltas[t].row(l) / cache.lengths(t, l);
        (*grad)[t].row(s) += gl * dir;
        (*grad)[t].row(e) -= gl * dir;
      }
  }

  out.total = w.limb * out.limb + w.symm * out.symm + w.temporal * out.temporal +
              w.reg * out.reg;
  return out;
}

}  // namespace

PoseLossBreakdown loss_pose3d(const PoseTrajectory3D& traj, const PoseTrajectory3D& init,
                              const LimbTopology& topo, const RefineWeights& w, double eps) {
  return loss_impl(traj, init, topo, w, eps, nullptr);
}

PoseLossBreakdown loss_pose3d_gradient(const PoseTrajectory3D& traj,
                                       const PoseTrajectory3D& init,
                                       const LimbTopology& topo, const RefineWeights& w,
                                       double eps, std::vector<Eigen::MatrixX3d>& grad) {
  return loss_impl(traj, init, topo, w, eps, &grad);
}

PoseTrajectory3D interpolate_invalid(const PoseTrajectory3D& traj) {
  PoseTrajectory3D out = traj;
  const int frame_count = traj.num_frames();
  const int joint_count = traj.num_joints();

  for (int j = 0; j < joint_count; ++j) {
    std::vector<int> known;
    for (int t = 0; t < frame_count; ++t)
      if (traj.valid[t][j]) known.push_back(t);

    if (known.empty()) {
      // Never observed: frame centroid of valid joints, else origin.
      for (int t = 0; t < frame_count; ++t) {
        Eigen::RowVector3d centroid = Eigen::RowVector3d::Zero();
        int n = 0;
        for (int k = 0; k < joint_count; ++k)
          if (traj.valid[t][k]) {
            centroid += traj.frames[t].row(k);
            ++n;
          }
        out.frames[t].row(j) =
            n > 0 ? Eigen::RowVector3d(centroid / n) : Eigen::RowVector3d::Zero();
      }
      continue;
    }

    std::size_t next = 0;
    for (int t = 0; t < frame_count; ++t) {
      if (traj.valid[t][j]) continue;
      while (next < known.size() && known[next] < t) ++next;
      if (next == 0) {
        out.frames[t].row(j) = traj.frames[known.front()].row(j);
      } else if (next == known.size()) {
        out.frames[t].row(j) = traj.frames[known.back()].row(j);
      } else {
        const int t0 = known[next - 1], t1 = known[next];
        const double a = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
        out.frames[t].row(j) =
            (1.0 - a) * traj.frames[t0].row(j) + a * traj.frames[t1].row(j);
      }
    }
  }
  return out;
}

PoseTrajectory3D refine(const PoseTrajectory3D& traj_init, const LimbTopology& topo,
                        const RefineWeights& w, const OptimizeConfig& cfg) {
  if (traj_init.num_frames() < 1)
    throw Error(ErrorCode::ShapeMismatch, "empty trajectory");
  check_finite_valid(traj_init);
  topo.validate(traj_init.num_joints());

  PoseTrajectory3D work = interpolate_invalid(traj_init);
  PoseTrajectory3D anchor = work;  // keeps the input mask for the reg term

  const int frame_count = work.num_frames();
  const int joint_count = work.num_joints();
  const Eigen::Index dim = static_cast<Eigen::Index>(frame_count) * joint_count * 3;

  auto flatten = [&](const PoseTrajectory3D& t) {
    Eigen::VectorXd x(dim);
    for (int f = 0; f < frame_count; ++f)
      for (int j = 0; j < joint_count; ++j)
        x.segment<3>((static_cast<Eigen::Index>(f) * joint_count + j) * 3) =
            t.frames[f].row(j).transpose();
    return x;
  };
  auto unflatten_into = [&](const Eigen::VectorXd& x, PoseTrajectory3D& t) {
    for (int f = 0; f < frame_count; ++f)
      for (int j = 0; j < joint_count; ++j)
        t.frames[f].row(j) =
            x.segment<3>((static_cast<Eigen::Index>(f) * joint_count + j) * 3).transpose();
  };

  std::vector<Eigen::MatrixX3d> grad_frames;
  const ObjectiveFn objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    unflatten_into(x, work);
    if (!g) return loss_pose3d(work, anchor, topo, w, cfg.epsilon).total;
    const PoseLossBreakdown b =
        loss_pose3d_gradient(work, anchor, topo, w, cfg.epsilon, grad_frames);
    for (int f = 0; f < frame_count; ++f)
      for (int j = 0; j < joint_count; ++j)
        g->segment<3>((static_cast<Eigen::Index>(f) * joint_count + j) * 3) =
            grad_frames[f].row(j).transpose();
    return b.total;
  };

  const OptimizeResult res = minimize_gradient_descent(flatten(work), objective, cfg);
  unflatten_into(res.x, work);
  work.valid.assign(static_cast<std::size_t>(frame_count),
                    std::vector<bool>(joint_count, true));
  return work;
}

}  // namespace ego3d
