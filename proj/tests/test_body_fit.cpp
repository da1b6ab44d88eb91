#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>

#include "ego3d/body_fit.hpp"
#include "ego3d/rng.hpp"
#include "oracles.hpp"

using namespace ego3d;

namespace {

BodyParams random_params(Rng& rng, double pose_scale = 0.3) {
  BodyParams p = BodyParams::rest();
  for (int j = 0; j < 23; ++j) {
    const Eigen::Matrix3d r = axis_angle_to_matrix(
        pose_scale * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
    p.pose.row(j) = matrix_to_rot6d(r).transpose();
  }
  for (int i = 0; i < 10; ++i) p.shape(i) = 0.5 * rng.normal();
  p.global = BodyGlobal::from_axis_angle(
      0.4 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()),
      Eigen::Vector3d(rng.uniform(-2, 2), 0.0, rng.uniform(-2, 2)));
  return p;
}

bool bits_equal(const double* a, const double* b, std::size_t n) {
  return std::memcmp(a, b, n * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("forward_kinematics: rest pose reproduces rest keypoints exactly") {
  const KinematicModel& model = KinematicModel::canonical();
  const Eigen::MatrixX3d got = forward_kinematics(model, BodyParams::rest());
  const Eigen::MatrixX3d expect =
      model.keypoint_regressor * model.rest_joints(Eigen::Matrix<double, 10, 1>::Zero());
  CHECK((got - expect).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: global translation shifts all keypoints") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(1);
  BodyParams p = random_params(rng);
  const Eigen::MatrixX3d base = forward_kinematics(model, p);
  p.global.translation += Eigen::Vector3d(0.7, -0.2, 1.5);
  const Eigen::MatrixX3d moved = forward_kinematics(model, p);
  const Eigen::MatrixX3d delta = moved - base;
  for (Eigen::Index j = 0; j < delta.rows(); ++j)
    CHECK((delta.row(j) - Eigen::RowVector3d(0.7, -0.2, 1.5)).norm() < 1e-12);
}

TEST_CASE("forward_kinematics: root rotation equals rotating the rest pose") {
  const KinematicModel& model = KinematicModel::canonical();
  BodyParams p = BodyParams::rest();
  const Eigen::Matrix3d rot =
      axis_angle_to_matrix(Eigen::Vector3d(0, 0, M_PI / 2));
  p.global.rot6d = matrix_to_rot6d(rot);
  const Eigen::MatrixX3d got = forward_kinematics(model, p);
  const Eigen::MatrixX3d rest = forward_kinematics(model, BodyParams::rest());
  CHECK((got - rest * rot.transpose()).norm() < 1e-9);
}

TEST_CASE("global axis-angle form converts losslessly") {
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d aa =
        rng.uniform(0.1, 2.8) *
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    const BodyGlobal g = BodyGlobal::from_axis_angle(aa, {1, 2, 3});
    CHECK((g.axis_angle() - aa).norm() < 1e-9);
  }
}

TEST_CASE("loss_mesh: exact target with zero priors scores zero") {
  const KinematicModel& model = KinematicModel::canonical();
  BodyParams p = BodyParams::rest();
  p.global.translation = {0.4, 0.0, -0.2};
  const Eigen::MatrixX3d target = forward_kinematics(model, p);
  MeshFitWeights w;
  w.pose_norm = 0.0;
  w.shape_prior = 0.0;
  const MeshLossBreakdown b = loss_mesh(model, p, target, w, coco17_topology());
  CHECK(b.total == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.data == 0.0);
  CHECK(b.limb == 0.0);      // single frame
  CHECK(b.temporal == 0.0);  // single frame
}

TEST_CASE("loss_mesh: data term is linear in its weight") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(3);
  const BodyParams p = random_params(rng);
  const Eigen::MatrixX3d target =
      forward_kinematics(model, BodyParams::rest());
  MeshFitWeights w1;
  MeshFitWeights w2 = w1;
  w2.data = 2.0 * w1.data;
  const MeshLossBreakdown a = loss_mesh(model, p, target, w1, coco17_topology());
  const MeshLossBreakdown b = loss_mesh(model, p, target, w2, coco17_topology());
  CHECK(a.data == doctest::Approx(b.data).epsilon(1e-14));  // raw term unchanged
  const double weighted_a = a.total - w1.data * a.data;
  const double weighted_b = b.total - w2.data * b.data;
  CHECK(weighted_a == doctest::Approx(weighted_b).epsilon(1e-12));
}

TEST_CASE("loss_mesh_sequence: random parameters match a scalar oracle to 1e-12") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(4);
  const int frames = 3;
  std::vector<BodyParams> seq;
  for (int t = 0; t < frames; ++t) seq.push_back(random_params(rng));
  for (auto& p : seq) p.shape = seq[0].shape;

  PoseTrajectory3D target;
  target.fps = 20.0;
  for (int t = 0; t < frames; ++t) {
    Eigen::MatrixX3d frame(17, 3);
    for (int j = 0; j < 17; ++j)
      frame.row(j) =
          Eigen::RowVector3d(rng.normal(), rng.normal() + 1.0, rng.normal());
    target.frames.push_back(frame);
  }
  target.valid.assign(frames, std::vector<bool>(17, true));

  MeshFitWeights w;
  w.data = 1.1;
  w.pose_norm = 0.2;
  w.limb = 0.5;
  w.symm = 0.7;
  w.temporal = 0.9;
  w.shape_prior = 0.3;
  const MeshLossBreakdown got =
      loss_mesh_sequence(model, seq, target, w, coco17_topology());

  // Scalar oracle.
  std::vector<Eigen::MatrixX3d> phi;
  for (const BodyParams& p : seq) phi.push_back(forward_kinematics(model, p));
  double data = 0.0;
  for (int t = 0; t < frames; ++t) {
    double sq = 0.0;
    for (int j = 0; j < 17; ++j)
      for (int a = 0; a < 3; ++a) {
        const double d = phi[static_cast<std::size_t>(t)](j, a) - target.frames[t](j, a);
        sq += d * d;
      }
    data += std::sqrt(sq);
  }
  double pose_norm = 0.0;
  for (const BodyParams& p : seq) {
    double sq = 0.0;
    for (int r = 0; r < 23; ++r)
      for (int c = 0; c < 6; ++c) sq += p.pose(r, c) * p.pose(r, c);
    pose_norm += std::sqrt(sq);
  }
  const LimbTopology& topo = coco17_topology();
  const auto ora = oracles::pose_loss_scalar(
      phi, phi, std::vector<std::vector<bool>>(frames, std::vector<bool>(17, true)),
      topo.limbs, topo.left_right_pairs);
  const double shape_prior = 0.5 * seq[0].shape.squaredNorm();

  CHECK(got.data == doctest::Approx(data).epsilon(1e-12));
  CHECK(got.pose_norm == doctest::Approx(pose_norm).epsilon(1e-12));
  CHECK(got.limb == doctest::Approx(ora.limb).epsilon(1e-12));
  CHECK(got.symm == doctest::Approx(ora.symm).epsilon(1e-12));
  CHECK(got.temporal == doctest::Approx(ora.temporal).epsilon(1e-12));
  CHECK(got.shape_prior == doctest::Approx(shape_prior).epsilon(1e-12));
  CHECK(got.total == doctest::Approx(1.1 * data + 0.2 * pose_norm + 0.5 * ora.limb +
                                     0.7 * ora.symm + 0.9 * ora.temporal +
                                     0.3 * shape_prior)
                         .epsilon(1e-12));
}

TEST_CASE("mesh loss gradient matches finite differences per block") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(5);
  const int frames = 2;
  std::vector<BodyParams> seq;
  for (int t = 0; t < frames; ++t) seq.push_back(random_params(rng, 0.2));
  for (auto& p : seq) p.shape = seq[0].shape;

  PoseTrajectory3D target;
  for (int t = 0; t < frames; ++t) {
    Eigen::MatrixX3d frame(17, 3);
    for (int j = 0; j < 17; ++j)
      frame.row(j) = Eigen::RowVector3d(rng.normal(), rng.normal() + 1.0, rng.normal());
    target.frames.push_back(frame);
  }
  target.valid.assign(frames, std::vector<bool>(17, true));
  target.valid[0][4] = false;  // exercise masking

  MeshFitWeights w;
  const double eps = 1e-9;
  MeshLossGradient grad;
  loss_mesh_sequence_gradient(model, seq, target, w, coco17_topology(), eps, grad);

  // Flatten: per frame pose(138) + rot6d(6) + trans(3), then shared shape(10).
  const Eigen::Index frame_dim = 147;
  Eigen::VectorXd x(frames * frame_dim + 10);
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < 23; ++j)
      x.segment<6>(t * frame_dim + 6 * j) = seq[static_cast<std::size_t>(t)].pose.row(j);
    x.segment<6>(t * frame_dim + 138) = seq[static_cast<std::size_t>(t)].global.rot6d;
    x.segment<3>(t * frame_dim + 144) = seq[static_cast<std::size_t>(t)].global.translation;
  }
  x.tail<10>() = seq[0].shape;

  const auto f = [&](const Eigen::VectorXd& v) {
    std::vector<BodyParams> tmp = seq;
    for (int t = 0; t < frames; ++t) {
      for (int j = 0; j < 23; ++j)
        tmp[static_cast<std::size_t>(t)].pose.row(j) = v.segment<6>(t * frame_dim + 6 * j);
      tmp[static_cast<std::size_t>(t)].global.rot6d = v.segment<6>(t * frame_dim + 138);
      tmp[static_cast<std::size_t>(t)].global.translation =
          v.segment<3>(t * frame_dim + 144);
      tmp[static_cast<std::size_t>(t)].shape = v.tail<10>();
    }
    return loss_mesh_sequence(model, tmp, target, w, coco17_topology(), eps).total;
  };
  const Eigen::VectorXd fd = oracles::finite_difference(f, x, 1e-6);

  double max_rel = 0.0;
  auto compare = [&](double analytic, Eigen::Index idx) {
    max_rel = std::max(max_rel,
                       std::abs(analytic - fd(idx)) / std::max(1.0, std::abs(fd(idx))));
  };
  for (int t = 0; t < frames; ++t) {
    for (int j = 0; j < 23; ++j)
      for (int c = 0; c < 6; ++c)
        compare(grad.pose[static_cast<std::size_t>(t)](j, c), t * frame_dim + 6 * j + c);
    for (int c = 0; c < 6; ++c)
      compare(grad.global_rot6d[static_cast<std::size_t>(t)](c), t * frame_dim + 138 + c);
    for (int c = 0; c < 3; ++c)
      compare(grad.global_translation[static_cast<std::size_t>(t)](c),
              t * frame_dim + 144 + c);
  }
  for (int c = 0; c < 10; ++c) compare(grad.shape(c), frames * frame_dim + c);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("fit_three_stage: stage isolation is bit-exact") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(6);
  const BodyParams truth = random_params(rng, 0.15);
  PoseTrajectory3D target;
  target.frames.push_back(forward_kinematics(model, truth));
  target.valid.assign(1, std::vector<bool>(17, true));

  BodyParams init = random_params(rng, 0.1);
  OptimizeConfig cfg;
  cfg.max_iterations = 60;
  const FitResult res = fit_three_stage(model, init, target, MeshFitWeights{},
                                        coco17_topology(), cfg);
  REQUIRE(res.params.size() == 1);

  // After stage 1, pose and shape carry the exact init bits.
  const BodyParams& s1 = res.stage_params[0][0];
  CHECK(bits_equal(s1.pose.data(), init.pose.data(), 23 * 6));
  CHECK(bits_equal(s1.shape.data(), init.shape.data(), 10));
  // Stage 2 moves only shape.
  const BodyParams& s2 = res.stage_params[1][0];
  CHECK(bits_equal(s2.pose.data(), s1.pose.data(), 23 * 6));
  CHECK(bits_equal(s2.global.rot6d.data(), s1.global.rot6d.data(), 6));
  CHECK(bits_equal(s2.global.translation.data(), s1.global.translation.data(), 3));
  // Stage 3 leaves shape untouched.
  const BodyParams& s3 = res.stage_params[2][0];
  CHECK(bits_equal(s3.shape.data(), s2.shape.data(), 10));
  // Losses over stages never increase.
  CHECK(res.stage_losses[1] <= res.stage_losses[0] + 1e-12);
  CHECK(res.stage_losses[2] <= res.stage_losses[1] + 1e-12);
}

TEST_CASE("fit_three_stage: pose prior alone shrinks the pose norm") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(8);
  BodyParams init = random_params(rng, 0.4);
  PoseTrajectory3D target;
  target.frames.push_back(forward_kinematics(model, init));
  target.valid.assign(1, std::vector<bool>(17, true));

  MeshFitWeights w;
  w.data = 0.0;
  w.pose_norm = 1.0;
  w.limb = w.symm = w.temporal = w.shape_prior = 0.0;
  OptimizeConfig cfg;
  cfg.max_iterations = 100;
  const FitResult res = fit_three_stage(model, init, target, w, coco17_topology(), cfg);
  CHECK(res.params[0].pose.norm() < init.pose.norm());
}

TEST_CASE("fit_three_stage: recovers a known body from a perturbed start") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(9);
  BodyParams truth = random_params(rng, 0.12);
  truth.shape.setZero();

  PoseTrajectory3D target;
  target.frames.push_back(forward_kinematics(model, truth));
  target.valid.assign(1, std::vector<bool>(17, true));

  BodyParams init = truth;
  init.global.translation += Eigen::Vector3d(0.05, -0.03, 0.05);
  init.global.rot6d = matrix_to_rot6d(
      axis_angle_to_matrix({0.05, -0.04, 0.06}) * rot6d_to_matrix(truth.global.rot6d));
  for (int j = 0; j < 23; ++j) {
    const Eigen::Matrix3d bump = axis_angle_to_matrix(
        0.05 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
    init.pose.row(j) = matrix_to_rot6d(
        bump * rot6d_to_matrix(init.pose.row(j).transpose())).transpose();
  }

  MeshFitWeights w;
  OptimizeConfig cfg;
  cfg.max_iterations = 400;
  const FitResult res = fit_three_stage(model, init, target, w, coco17_topology(), cfg);
  const Eigen::MatrixX3d fitted = forward_kinematics(model, res.params[0]);
  const double mpjpe =
      (fitted - target.frames[0]).rowwise().norm().mean();
  CHECK(mpjpe < 0.01 * model.skeleton_height());
}

TEST_CASE("rigid transform of target and global leaves the data term unchanged") {
  const KinematicModel& model = KinematicModel::canonical();
  Rng rng(10);
  const BodyParams p = random_params(rng, 0.2);
  PoseTrajectory3D target;
  Eigen::MatrixX3d frame(17, 3);
  for (int j = 0; j < 17; ++j)
    frame.row(j) = Eigen::RowVector3d(rng.normal(), rng.normal() + 1.0, rng.normal());
  target.frames.push_back(frame);
  target.valid.assign(1, std::vector<bool>(17, true));

  MeshFitWeights w;
  const double data_before = loss_mesh(model, p, target.frames[0], w, coco17_topology()).data;

  const Eigen::Matrix3d rot = axis_angle_to_matrix({0.2, 0.7, -0.3});
  const Eigen::Vector3d shift(1.0, 0.5, -2.0);
  BodyParams moved = p;
  moved.global.rot6d = matrix_to_rot6d(rot * rot6d_to_matrix(p.global.rot6d));
  moved.global.translation = rot * p.global.translation + shift;
  Eigen::MatrixX3d target_moved = (frame * rot.transpose()).rowwise() + shift.transpose();
  const double data_after =
      loss_mesh(model, moved, target_moved, w, coco17_topology()).data;
  CHECK(data_before == doctest::Approx(data_after).epsilon(1e-9));
}
