#include "ego3d/body_fit.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ego3d {

namespace {

constexpr double kRotTol = 1e-9;

double smoothed_norm(double sq, double eps) { return std::sqrt(sq + eps * eps); }

// Gram-Schmidt 6D -> SO(3) with the intermediates needed for backprop.
struct Rot6Cache {
  Eigen::Vector3d a1, a2, b1, b2, b3, u2;
  double n1 = 0.0, n2 = 0.0, c = 0.0;
};

Eigen::Matrix3d rot6d_forward(const Eigen::Matrix<double, 6, 1>& r, Rot6Cache& cc) {
  cc.a1 = r.head<3>();
  cc.a2 = r.tail<3>();
  cc.n1 = cc.a1.norm();
  if (cc.n1 < kRotTol)
    throw Error(ErrorCode::DegenerateRotation, "first 6d column is zero");
  cc.b1 = cc.a1 / cc.n1;
  cc.c = cc.b1.dot(cc.a2);
  cc.u2 = cc.a2 - cc.c * cc.b1;
  cc.n2 = cc.u2.norm();
  if (cc.n2 < kRotTol)
    throw Error(ErrorCode::DegenerateRotation, "6d columns are parallel");
  cc.b2 = cc.u2 / cc.n2;
  cc.b3 = cc.b1.cross(cc.b2);
  Eigen::Matrix3d out;
  out.col(0) = cc.b1;
  out.col(1) = cc.b2;
  out.col(2) = cc.b3;
  return out;
}

Eigen::Matrix<double, 6, 1> rot6d_backward(const Rot6Cache& cc, const Eigen::Matrix3d& d_rot) {
  const Eigen::Vector3d db3 = d_rot.col(2);
  Eigen::Vector3d db2 = d_rot.col(1) + db3.cross(cc.b1);
  Eigen::Vector3d db1 = d_rot.col(0) + cc.b2.cross(db3);
  const Eigen::Vector3d du2 = (db2 - cc.b2 * cc.b2.dot(db2)) / cc.n2;
  const Eigen::Vector3d da2 = du2 - cc.b1 * cc.b1.dot(du2);
  db1 += -du2.dot(cc.b1) * cc.a2 - cc.c * du2;
  const Eigen::Vector3d da1 = (db1 - cc.b1 * cc.b1.dot(db1)) / cc.n1;
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = da1;
  out.tail<3>() = da2;
  return out;
}

struct FkCache {
  Eigen::Matrix<double, KinematicModel::kJoints, 3> offsets;
  std::array<Rot6Cache, KinematicModel::kJoints> rot;
  std::array<Eigen::Matrix3d, KinematicModel::kJoints> local;
  std::array<Eigen::Matrix3d, KinematicModel::kJoints> global;
  Eigen::Matrix<double, KinematicModel::kJoints, 3> joints;
};

void fk_forward(const KinematicModel& model, const BodyParams& p, FkCache& cc) {
  constexpr int n = KinematicModel::kJoints;
  cc.offsets = model.shaped_offsets(p.shape);
  cc.local[0] = rot6d_forward(p.global.rot6d, cc.rot[0]);
  cc.global[0] = cc.local[0];
  cc.joints.row(0) =
      (p.global.translation + cc.global[0] * cc.offsets.row(0).transpose()).transpose();
  for (int j = 1; j < n; ++j) {
    const int par = model.parents[j];
    cc.local[j] = rot6d_forward(p.pose.row(j - 1).transpose(), cc.rot[j]);
    cc.global[j] = cc.global[par] * cc.local[j];
    cc.joints.row(j) = cc.joints.row(par) +
                       (cc.global[par] * cc.offsets.row(j).transpose()).transpose();
  }
}

struct FkGrad {
  Eigen::Matrix<double, 23, 6> pose = Eigen::Matrix<double, 23, 6>::Zero();
  Eigen::Matrix<double, 6, 1> global_rot6d = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Vector3d global_translation = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 10, 1> shape = Eigen::Matrix<double, 10, 1>::Zero();
};

// Reverse pass: d_joints is dL/dX (24 x 3). Parents always precede children
// in the joint numbering, so one descending sweep accumulates everything.
void fk_backward(const KinematicModel& model, const FkCache& cc,
                 const Eigen::Matrix<double, KinematicModel::kJoints, 3>& d_joints,
                 FkGrad& out) {
  constexpr int n = KinematicModel::kJoints;
  Eigen::Matrix<double, n, 3> dx = d_joints;
  std::array<Eigen::Matrix3d, n> dg;
  dg.fill(Eigen::Matrix3d::Zero());
  Eigen::Matrix<double, n, 3> doff = Eigen::Matrix<double, n, 3>::Zero();

  for (int j = n - 1; j >= 1; --j) {
    const int par = model.parents[j];
    const Eigen::Vector3d dxj = dx.row(j).transpose();
    dx.row(par) += dx.row(j);
    dg[par] += dxj * cc.offsets.row(j);
    doff.row(j) += (cc.global[par].transpose() * dxj).transpose();
    dg[par] += dg[j] * cc.local[j].transpose();
    const Eigen::Matrix3d dr = cc.global[par].transpose() * dg[j];
    out.pose.row(j - 1) += rot6d_backward(cc.rot[j], dr).transpose();
  }
  const Eigen::Vector3d dx0 = dx.row(0).transpose();
  out.global_translation += dx0;
  dg[0] += dx0 * cc.offsets.row(0);
  doff.row(0) += (cc.global[0].transpose() * dx0).transpose();
  out.global_rot6d += rot6d_backward(cc.rot[0], dg[0]);

  Eigen::Matrix<double, 3 * n, 1> doff_vec;
  for (int j = 0; j < n; ++j)
    doff_vec.segment<3>(3 * j) = doff.row(j).transpose();
  out.shape += model.shape_basis.transpose() * doff_vec;
}

}  // namespace

BodyGlobal BodyGlobal::from_axis_angle(const Eigen::Vector3d& axis_angle,
                                       const Eigen::Vector3d& translation) {
  BodyGlobal g;
  g.rot6d = matrix_to_rot6d(axis_angle_to_matrix(axis_angle));
  g.translation = translation;
  return g;
}

Eigen::Vector3d BodyGlobal::axis_angle() const {
  const Eigen::AngleAxisd aa(rot6d_to_matrix(rot6d));
  return aa.angle() * aa.axis();
}

BodyParams BodyParams::rest() {
  BodyParams p;
  for (int j = 0; j < 23; ++j) p.pose.row(j) << 1, 0, 0, 0, 1, 0;
  return p;
}

void KinematicModel::validate() const {
  if (parents[0] != -1)
    throw Error(ErrorCode::InvalidConfig, "joint 0 must be the root");
  for (int j = 1; j < kJoints; ++j)
    if (parents[j] < 0 || parents[j] >= j)
      throw Error(ErrorCode::InvalidConfig,
                  "parents must be topologically ordered (parent < child)");
  if (keypoint_regressor.cols() != kJoints || keypoint_regressor.rows() < 1)
    throw Error(ErrorCode::InvalidConfig, "keypoint regressor must be J x 24");
}

Eigen::Matrix<double, KinematicModel::kJoints, 3> KinematicModel::shaped_offsets(
    const Eigen::Matrix<double, 10, 1>& shape) const {
  const Eigen::Matrix<double, 3 * kJoints, 1> delta = shape_basis * shape;
  Eigen::Matrix<double, kJoints, 3> out = rest_offsets;
  for (int j = 0; j < kJoints; ++j)
    out.row(j) += delta.segment<3>(3 * j).transpose();
  return out;
}

Eigen::Matrix<double, KinematicModel::kJoints, 3> KinematicModel::rest_joints(
    const Eigen::Matrix<double, 10, 1>& shape) const {
  const Eigen::Matrix<double, kJoints, 3> offsets = shaped_offsets(shape);
  Eigen::Matrix<double, kJoints, 3> joints;
  joints.row(0) = offsets.row(0);
  for (int j = 1; j < kJoints; ++j)
    joints.row(j) = joints.row(parents[j]) + offsets.row(j);
  return joints;
}

double KinematicModel::skeleton_height() const {
  const auto joints = rest_joints(Eigen::Matrix<double, 10, 1>::Zero());
  return joints.col(1).maxCoeff() - joints.col(1).minCoeff();
}

const KinematicModel& KinematicModel::canonical() {
  static const KinematicModel model = [] {
    KinematicModel m;
    // 0 pelvis, 1/2 hips, 3 spine1, 4/5 knees, 6 spine2, 7/8 ankles,
    // 9 chest, 10/11 feet, 12 neck, 13/14 collars, 15 head,
    // 16/17 shoulders, 18/19 elbows, 20/21 wrists, 22/23 hands.
    // Left side is +x, the body faces +z, y is up.
    m.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    m.rest_offsets << 0.00, 0.95, 0.00,   // pelvis above origin
        0.09, -0.06, 0.00, -0.09, -0.06, 0.00,  // hips
        0.00, 0.11, 0.00,                        // spine1
        0.00, -0.38, 0.00, 0.00, -0.38, 0.00,    // knees
        0.00, 0.12, 0.00,                        // spine2
        0.00, -0.40, 0.00, 0.00, -0.40, 0.00,    // ankles
        0.00, 0.12, 0.00,                        // chest
        0.00, -0.06, 0.12, 0.00, -0.06, 0.12,    // feet
        0.00, 0.09, 0.00,                        // neck
        0.07, 0.05, 0.00, -0.07, 0.05, 0.00,     // collars
        0.00, 0.14, 0.00,                        // head
        0.11, 0.00, 0.00, -0.11, 0.00, 0.00,     // shoulders
        0.26, 0.00, 0.00, -0.26, 0.00, 0.00,     // elbows (T-pose arms)
        0.25, 0.00, 0.00, -0.25, 0.00, 0.00,     // wrists
        0.08, 0.00, 0.00, -0.08, 0.00, 0.00;     // hands

    // Shape basis: per-component scalings of offset groups (limb lengths,
    // widths). Column k => delta offsets per unit of shape[k].
    m.shape_basis.setZero();
    auto scale_group = [&](int col, std::initializer_list<int> joints, double factor) {
      for (int j : joints)
        for (int a = 0; a < 3; ++a)
          m.shape_basis(3 * j + a, col) += factor * m.rest_offsets(j, a);
    };
    std::initializer_list<int> all = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,
                                      13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23};
    scale_group(0, all, 0.06);                       // overall size
    scale_group(1, {4, 5, 7, 8, 10, 11}, 0.08);      // legs
    scale_group(2, {18, 19, 20, 21, 22, 23}, 0.08);  // arms
    scale_group(3, {3, 6, 9, 12}, 0.06);             // torso
    scale_group(4, {13, 14, 16, 17}, 0.05);          // shoulder width
    scale_group(5, {1, 2}, 0.04);                    // hip width
    scale_group(6, {12, 15}, 0.04);                  // neck/head
    scale_group(7, {10, 11}, 0.03);                  // feet
    scale_group(8, {4, 5}, 0.05);                    // thigh vs shin trade
    scale_group(8, {7, 8}, -0.05);
    scale_group(9, {18, 19}, 0.05);                  // upper arm vs forearm
    scale_group(9, {20, 21}, -0.05);

    // COCO-17 regressor. Face keypoints are affine blends of head and
    // shoulders so they stay distinct and translation-equivariant.
    m.keypoint_regressor = Eigen::MatrixXd::Zero(17, kJoints);
    auto set_kp = [&](int kp, std::initializer_list<std::pair<int, double>> terms) {
      for (const auto& [j, wgt] : terms) m.keypoint_regressor(kp, j) = wgt;
    };
    set_kp(0, {{15, 1.0}});                  // nose
    set_kp(1, {{15, 0.92}, {16, 0.08}});     // left eye
    set_kp(2, {{15, 0.92}, {17, 0.08}});     // right eye
    set_kp(3, {{15, 0.85}, {16, 0.15}});     // left ear
    set_kp(4, {{15, 0.85}, {17, 0.15}});     // right ear
    set_kp(5, {{16, 1.0}});
    set_kp(6, {{17, 1.0}});
    set_kp(7, {{18, 1.0}});
    set_kp(8, {{19, 1.0}});
    set_kp(9, {{20, 1.0}});
    set_kp(10, {{21, 1.0}});
    set_kp(11, {{1, 1.0}});
    set_kp(12, {{2, 1.0}});
    set_kp(13, {{4, 1.0}});
    set_kp(14, {{5, 1.0}});
    set_kp(15, {{7, 1.0}});
    set_kp(16, {{8, 1.0}});
    m.validate();
    return m;
  }();
  return model;
}

Eigen::Matrix<double, KinematicModel::kJoints, 3> forward_kinematics_joints(
    const KinematicModel& model, const BodyParams& params) {
  FkCache cc;
  fk_forward(model, params, cc);
  return cc.joints;
}

Eigen::MatrixX3d forward_kinematics(const KinematicModel& model, const BodyParams& params) {
  return model.keypoint_regressor * forward_kinematics_joints(model, params);
}

namespace {

MeshLossBreakdown mesh_loss_impl(const KinematicModel& model,
                                 const std::vector<BodyParams>& params,
                                 const PoseTrajectory3D& target, const MeshFitWeights& w,
                                 const LimbTopology& topo, double eps,
                                 MeshLossGradient* grad) {
  const int frame_count = target.num_frames();
  if (static_cast<int>(params.size()) != frame_count)
    throw Error(ErrorCode::ShapeMismatch, "one parameter set per target frame required");
  if (frame_count == 0) throw Error(ErrorCode::ShapeMismatch, "empty target");
  if (target.num_joints() != model.num_keypoints())
    throw Error(ErrorCode::ShapeMismatch, "target joint count != model keypoints");

  const Eigen::Matrix<double, 10, 1>& shape = params[0].shape;

  std::vector<FkCache> caches(static_cast<std::size_t>(frame_count));
  std::vector<Eigen::MatrixX3d> keypoint_frames;
  keypoint_frames.reserve(caches.size());
  for (int t = 0; t < frame_count; ++t) {
    BodyParams pt = params[static_cast<std::size_t>(t)];
    pt.shape = shape;  // shape is shared
    fk_forward(model, pt, caches[static_cast<std::size_t>(t)]);
    keypoint_frames.push_back(model.keypoint_regressor *
                              caches[static_cast<std::size_t>(t)].joints);
  }

  MeshLossBreakdown out;
  std::vector<Eigen::MatrixX3d> d_keypoints(
      static_cast<std::size_t>(frame_count),
      Eigen::MatrixX3d::Zero(model.num_keypoints(), 3));

  // Data term: per-frame norm of the masked keypoint residual.
  for (int t = 0; t < frame_count; ++t) {
    Eigen::MatrixX3d r = keypoint_frames[static_cast<std::size_t>(t)] - target.frames[t];
    for (int j = 0; j < target.num_joints(); ++j)
      if (!target.valid[t][j]) r.row(j).setZero();
    const double n = smoothed_norm(r.squaredNorm(), eps);
    out.data += n;
    if (grad && n > 0.0) d_keypoints[static_cast<std::size_t>(t)] += (w.data / n) * r;
  }

  // Limb/symmetry/temporal over the Phi trajectory, via the pose3d machinery.
  {
    PoseTrajectory3D phi_traj = PoseTrajectory3D::all_valid(keypoint_frames, target.fps);
    RefineWeights rw;
    rw.limb = w.limb;
    rw.symm = w.symm;
    rw.temporal = w.temporal;
    rw.reg = 0.0;
    if (grad) {
      std::vector<Eigen::MatrixX3d> g;
      const PoseLossBreakdown b = loss_pose3d_gradient(phi_traj, phi_traj, topo, rw, eps, g);
      out.limb = b.limb;
      out.symm = b.symm;
      out.temporal = b.temporal;
      for (int t = 0; t < frame_count; ++t)
        d_keypoints[static_cast<std::size_t>(t)] += g[static_cast<std::size_t>(t)];
    } else {
      const PoseLossBreakdown b = loss_pose3d(phi_traj, phi_traj, topo, rw, eps);
      out.limb = b.limb;
      out.symm = b.symm;
      out.temporal = b.temporal;
    }
  }

  // Pose-magnitude prior, per frame.
  for (int t = 0; t < frame_count; ++t) {
    const auto& pose = params[static_cast<std::size_t>(t)].pose;
    const double n = smoothed_norm(pose.squaredNorm(), eps);
    out.pose_norm += n;
    if (grad && n > 0.0)
      grad->pose[static_cast<std::size_t>(t)] += (w.pose_norm / n) * pose;
  }

  // Gaussian shape prior on the shared shape.
  out.shape_prior = 0.5 * shape.squaredNorm();
  if (grad) grad->shape += w.shape_prior * shape;

  // Backprop the keypoint gradients through the regressor and the kinematics.
  if (grad) {
    for (int t = 0; t < frame_count; ++t) {
      const Eigen::Matrix<double, KinematicModel::kJoints, 3> d_joints =
          model.keypoint_regressor.transpose() * d_keypoints[static_cast<std::size_t>(t)];
      FkGrad fg;
      fk_backward(model, caches[static_cast<std::size_t>(t)], d_joints, fg);
      grad->pose[static_cast<std::size_t>(t)] += fg.pose;
      grad->global_rot6d[static_cast<std::size_t>(t)] += fg.global_rot6d;
      grad->global_translation[static_cast<std::size_t>(t)] += fg.global_translation;
      grad->shape += fg.shape;
    }
  }

  out.total = w.data * out.data + w.pose_norm * out.pose_norm + w.limb * out.limb +
              w.symm * out.symm + w.temporal * out.temporal +
              w.shape_prior * out.shape_prior;
  return out;
}

}  // namespace

MeshLossBreakdown loss_mesh_sequence(const KinematicModel& model,
                                     const std::vector<BodyParams>& params,
                                     const PoseTrajectory3D& target,
                                     const MeshFitWeights& w, const LimbTopology& topo,
                                     double eps) {
  return mesh_loss_impl(model, params, target, w, topo, eps, nullptr);
}

MeshLossBreakdown loss_mesh(const KinematicModel& model, const BodyParams& params,
                            const Eigen::MatrixX3d& target, const MeshFitWeights& w,
                            const LimbTopology& topo, double eps) {
  PoseTrajectory3D t = PoseTrajectory3D::all_valid({target});
  return mesh_loss_impl(model, {params}, t, w, topo, eps, nullptr);
}

MeshLossBreakdown loss_mesh_sequence_gradient(const KinematicModel& model,
                                              const std::vector<BodyParams>& params,
                                              const PoseTrajectory3D& target,
                                              const MeshFitWeights& w,
                                              const LimbTopology& topo, double eps,
                                              MeshLossGradient& grad) {
  grad.pose.assign(params.size(), Eigen::Matrix<double, 23, 6>::Zero());
  grad.global_rot6d.assign(params.size(), Eigen::Matrix<double, 6, 1>::Zero());
  grad.global_translation.assign(params.size(), Eigen::Vector3d::Zero());
  grad.shape.setZero();
  return mesh_loss_impl(model, params, target, w, topo, eps, &grad);
}

namespace {

constexpr Eigen::Index kFrameDim = 23 * 6 + 6 + 3;  // pose + rot6d + translation

Eigen::VectorXd pack_params(const std::vector<BodyParams>& params) {
  const auto frames = static_cast<Eigen::Index>(params.size());
  Eigen::VectorXd x(frames * kFrameDim + 10);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const BodyParams& p = params[static_cast<std::size_t>(t)];
    Eigen::Index off = t * kFrameDim;
    for (int j = 0; j < 23; ++j)
      x.segment<6>(off + 6 * j) = p.pose.row(j).transpose();
    x.segment<6>(off + 138) = p.global.rot6d;
    x.segment<3>(off + 144) = p.global.translation;
  }
  x.tail<10>() = params[0].shape;
  return x;
}

void unpack_params(const Eigen::VectorXd& x, std::vector<BodyParams>& params) {
  const auto frames = static_cast<Eigen::Index>(params.size());
  for (Eigen::Index t = 0; t < frames; ++t) {
    BodyParams& p = params[static_cast<std::size_t>(t)];
    Eigen::Index off = t * kFrameDim;
    for (int j = 0; j < 23; ++j)
      p.pose.row(j) = x.segment<6>(off + 6 * j).transpose();
    p.global.rot6d = x.segment<6>(off + 138);
    p.global.translation = x.segment<3>(off + 144);
    p.shape = x.tail<10>();
  }
}

}  // namespace

FitResult fit_three_stage(const KinematicModel& model, const BodyParams& init,
                          const PoseTrajectory3D& target, const MeshFitWeights& w,
                          const LimbTopology& topo, const OptimizeConfig& cfg) {
  model.validate();
  const int frame_count = target.num_frames();
  if (frame_count < 1) throw Error(ErrorCode::ShapeMismatch, "empty target");

  std::vector<BodyParams> seq(static_cast<std::size_t>(frame_count), init);
  Eigen::VectorXd x = pack_params(seq);

  // free_pose/free_global/free_shape select the blocks each stage may move;
  // frozen blocks get zero gradient, so their bits never change.
  auto run_stage = [&](bool free_pose, bool free_global, bool free_shape) {
    MeshLossGradient mg;
    const ObjectiveFn objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
      unpack_params(v, seq);
      if (!g) {
        try {
          return loss_mesh_sequence(model, seq, target, w, topo, cfg.epsilon).total;
        } catch (const Error&) {
          return std::numeric_limits<double>::infinity();  // reject the step
        }
      }
      const MeshLossBreakdown b =
          loss_mesh_sequence_gradient(model, seq, target, w, topo, cfg.epsilon, mg);
      g->setZero(v.size());
      for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(seq.size()); ++t) {
        const Eigen::Index off = t * kFrameDim;
        if (free_pose)
          for (int j = 0; j < 23; ++j)
            g->segment<6>(off + 6 * j) = mg.pose[static_cast<std::size_t>(t)].row(j).transpose();
        if (free_global) {
          g->segment<6>(off + 138) = mg.global_rot6d[static_cast<std::size_t>(t)];
          g->segment<3>(off + 144) = mg.global_translation[static_cast<std::size_t>(t)];
        }
      }
      if (free_shape) g->tail<10>() = mg.shape;
      return b.total;
    };
    const OptimizeResult res = minimize_gradient_descent(x, objective, cfg);
    x = res.x;
    unpack_params(x, seq);
    return res.value;
  };

  FitResult out;
  out.stage_losses[0] = run_stage(false, true, false);  // global
  out.stage_params[0] = seq;
  out.stage_losses[1] = run_stage(false, false, true);  // shape
  out.stage_params[1] = seq;
  out.stage_losses[2] = run_stage(true, true, false);   // pose + global
  out.stage_params[2] = seq;
  out.params = seq;
  out.final_loss = out.stage_losses[2];
  return out;
}

BodyParams rest_init_for_target(const KinematicModel& model, const PoseTrajectory3D& target) {
  BodyParams p = BodyParams::rest();
  const Eigen::MatrixX3d rest_kp = forward_kinematics(model, p);
  const Eigen::RowVector3d rest_centroid = rest_kp.colwise().mean();

  Eigen::RowVector3d target_centroid = Eigen::RowVector3d::Zero();
  int n = 0;
  for (int t = 0; t < target.num_frames(); ++t)
    for (int j = 0; j < target.num_joints(); ++j)
      if (target.valid[t][j]) {
        target_centroid += target.frames[t].row(j);
        ++n;
      }
  if (n > 0)
    p.global.translation = (target_centroid / n - rest_centroid).transpose();
  return p;
}

}  // namespace ego3d
