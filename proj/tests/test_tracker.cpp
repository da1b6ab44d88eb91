#include <doctest.h>

#include <Eigen/Dense>
#include <set>

#include "ego3d/rng.hpp"
#include "ego3d/tracker.hpp"
#include "oracles.hpp"

using namespace ego3d;

namespace {

DetectionInput det(const Bbox& b, double score = 1.0,
                   std::optional<Eigen::Vector3d> root = std::nullopt) {
  DetectionInput d;
  d.bbox = b;
  d.score = score;
  d.root_cam = root;
  return d;
}

}  // namespace

TEST_CASE("kalman: measurement equal to the prediction leaves the state put") {
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.5;
  KalmanFilter kf(x0, Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd f(2, 2);
  f << 1, 1, 0, 1;
  kf.predict(f, Eigen::MatrixXd::Zero(2, 2));
  CHECK(kf.state()(0) == doctest::Approx(1.5));
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 2);
  kf.update(kf.state().head<1>(), h, 0.01 * Eigen::MatrixXd::Identity(1, 1));
  CHECK(kf.state()(0) == doctest::Approx(1.5));
  CHECK(kf.state()(1) == doctest::Approx(0.5));
}

TEST_CASE("kalman: pure predict advances by the constant velocity") {
  Eigen::VectorXd x0(2);
  x0 << 0.0, 1.0;
  KalmanFilter kf(x0, Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd f(2, 2);
  f << 1, 1, 0, 1;  // dt = 1
  kf.predict(f, Eigen::MatrixXd::Zero(2, 2));
  CHECK(kf.state()(0) == doctest::Approx(1.0));
}

TEST_CASE("kalman: filtering beats raw measurements on a noisy track") {
  Rng rng(42);
  PointKalman kf(Eigen::Vector3d::Zero(), 0.25, 1.0);
  Eigen::Vector3d truth(0, 0, 0);
  const Eigen::Vector3d vel(1.0, 0.0, 0.5);
  double meas_err = 0.0, post_err = 0.0;
  for (int step = 0; step < 50; ++step) {
    truth += vel * 0.05;
    kf.predict(0.05);
    const Eigen::Vector3d z =
        truth + 0.25 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    kf.update(z);
    meas_err += (z - truth).squaredNorm();
    post_err += (kf.predicted_point() - truth).squaredNorm();
  }
  CHECK(post_err < meas_err);
}

TEST_CASE("kalman: singular innovation is reported") {
  Eigen::VectorXd x0(2);
  x0 << 0.0, 0.0;
  KalmanFilter kf(x0, Eigen::MatrixXd::Zero(2, 2));
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 2);
  CHECK_THROWS_WITH_AS(kf.update(Eigen::VectorXd::Ones(1), h, Eigen::MatrixXd::Zero(1, 1)),
                       doctest::Contains("SingularInnovation"), Error);
}

TEST_CASE("to_world: identity, translation, random round trip") {
  CHECK((to_world({1, 2, 3}, RigidPose{}) - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);

  RigidPose shift;
  shift.translation = {1.0, 0.0, 0.0};
  const Eigen::Vector3d p(0.5, 0.5, 2.0);
  CHECK((shift.apply(to_world(p, shift)) - p).norm() < 1e-12);

  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    RigidPose pose;
    pose.rotation = axis_angle_to_matrix(
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized() *
        rng.uniform(0.1, 3.0));
    pose.translation = {rng.normal(), rng.normal(), rng.normal()};
    const Eigen::Vector3d q(rng.normal(), rng.normal(), rng.normal());
    CHECK((pose.apply(to_world(q, pose)) - q).norm() < 1e-12);
  }
}

TEST_CASE("association_cost: hand arithmetic and gating") {
  AssociationConfig cfg;
  cfg.alpha = 0.5;
  cfg.dist_scale = 2.0;
  cfg.gate_iou = 0.1;
  cfg.gate_dist = 3.0;

  const Bbox b{0, 0, 10, 10};
  SUBCASE("identical bbox and root cost zero") {
    CHECK(association_cost(b, Eigen::Vector3d(1, 1, 1), b, Eigen::Vector3d(1, 1, 1), cfg) ==
          doctest::Approx(0.0));
  }
  SUBCASE("alpha blend at half IoU and half dist_scale") {
    // IoU = 0.5 box pair: [0,0,10,10] vs [0,0,10,5] has IoU 0.5.
    const Bbox half{0, 0, 10, 5};
    const double c = association_cost(b, Eigen::Vector3d(0, 0, 0), half,
                                      Eigen::Vector3d(1, 0, 0), cfg);
    CHECK(c == doctest::Approx(0.5 * 0.5 + 0.5 * 0.5));
  }
  SUBCASE("saturated distance and disjoint boxes cost one when gated in") {
    const Bbox far_box{20, 20, 30, 30};
    const double c = association_cost(b, Eigen::Vector3d(0, 0, 0), far_box,
                                      Eigen::Vector3d(2.5, 0, 0), cfg);
    CHECK(c == doctest::Approx(1.0));  // dist 2.5 < gate 3 admits the pair
  }
  SUBCASE("both gates failing forbids the pair") {
    const Bbox far_box{20, 20, 30, 30};
    const double c = association_cost(b, Eigen::Vector3d(0, 0, 0), far_box,
                                      Eigen::Vector3d(9, 0, 0), cfg);
    CHECK(std::isinf(c));
  }
  SUBCASE("missing roots fall back to pure IoU") {
    const Bbox half{0, 0, 10, 5};
    CHECK(association_cost(b, std::nullopt, half, Eigen::Vector3d(0, 0, 0), cfg) ==
          doctest::Approx(0.5));
    const Bbox far_box{50, 50, 60, 60};
    CHECK(std::isinf(association_cost(b, std::nullopt, far_box, std::nullopt, cfg)));
  }
}

TEST_CASE("tracker: one subject tracked without switches") {
  MultiObjectTracker tracker;
  std::set<int> ids;
  int emitted = 0;
  for (int f = 0; f < 100; ++f) {
    const double x = 10.0 + 2.0 * f;
    const auto out = tracker.step(
        {det({x, 20, x + 40, 120}, 1.0, Eigen::Vector3d(0.1 * f, 0, 4.0))}, RigidPose{},
        0.05);
    for (const auto& t : out) {
      ids.insert(t.id);
      ++emitted;
    }
  }
  CHECK(ids.size() == 1);
  CHECK(emitted == 100);  // early-frame emission covers the warmup
}

TEST_CASE("tracker: lifecycle status transitions") {
  AssociationConfig cfg;
  cfg.min_hits = 3;
  cfg.max_age = 2;
  MultiObjectTracker tracker(cfg);
  const auto feed = [&](bool present) {
    std::vector<DetectionInput> dets;
    if (present) dets.push_back(det({10, 10, 60, 130}, 1.0, Eigen::Vector3d(0, 0, 4)));
    tracker.step(dets, RigidPose{}, 0.05);
  };
  feed(true);
  REQUIRE(tracker.tracks().size() == 1);
  CHECK(tracker.tracks()[0].status == TrackStatus::Tentative);
  feed(true);
  CHECK(tracker.tracks()[0].status == TrackStatus::Tentative);
  feed(true);
  CHECK(tracker.tracks()[0].status == TrackStatus::Confirmed);  // hits reached min_hits
  feed(false);
  feed(false);
  feed(false);  // time_since_update exceeds max_age
  CHECK(tracker.tracks().empty());
}

TEST_CASE("tracker: reappearance within max_age keeps the id") {
  AssociationConfig cfg;
  cfg.max_age = 10;
  MultiObjectTracker tracker(cfg);
  std::set<int> ids;
  for (int f = 0; f < 40; ++f) {
    std::vector<DetectionInput> dets;
    const bool gap = f >= 15 && f < 15 + cfg.max_age - 1;
    if (!gap)
      dets.push_back(det({100, 100, 150, 220}, 1.0, Eigen::Vector3d(0, 0, 5.0)));
    for (const auto& t : tracker.step(dets, RigidPose{}, 0.05)) ids.insert(t.id);
  }
  CHECK(ids.size() == 1);
}

TEST_CASE("tracker: ids are never reused") {
  AssociationConfig cfg;
  cfg.max_age = 2;
  cfg.min_hits = 1;
  MultiObjectTracker tracker(cfg);
  std::set<int> seen;
  for (int burst = 0; burst < 5; ++burst) {
    for (int f = 0; f < 4; ++f) {
      const double x = 50.0 + 120.0 * burst;
      const auto out =
          tracker.step({det({x, 50, x + 30, 120}, 1.0, Eigen::Vector3d(burst * 2.0, 0, 5))},
                       RigidPose{}, 0.05);
      for (const auto& t : out) seen.insert(t.id);
    }
    for (int f = 0; f < 6; ++f) tracker.step({}, RigidPose{}, 0.05);  // let it die
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("tracker: deterministic given identical inputs") {
  Rng rng(9);
  std::vector<std::vector<DetectionInput>> stream;
  for (int f = 0; f < 30; ++f) {
    std::vector<DetectionInput> dets;
    for (int s = 0; s < 3; ++s) {
      const double x = 100.0 * s + 3.0 * f + rng.uniform(-2, 2);
      dets.push_back(det({x, 40, x + 35, 130}, rng.uniform(0.6, 1.0),
                         Eigen::Vector3d(s * 1.5, 0, 4 + 0.05 * f)));
    }
    stream.push_back(dets);
  }
  auto run = [&] {
    MultiObjectTracker tracker;
    std::vector<std::tuple<int, int, double, double>> log;
    for (int f = 0; f < 30; ++f)
      for (const auto& t : tracker.step(stream[static_cast<std::size_t>(f)], RigidPose{}, 0.05))
        log.emplace_back(f, t.id, t.bbox.x1, t.world_root ? t.world_root->x() : -1.0);
    return log;
  };
  CHECK(run() == run());
}

TEST_CASE("tracker: 3D association survives a crossing that defeats IoU") {
  // Two subjects approach, detections vanish for 10 frames while they cross,
  // and both reverse direction during the blackout. Constant-velocity 2D
  // prediction then matches each track to the wrong detection; the 3D roots
  // (2 m apart in depth) keep them separated.
  auto run = [&](double alpha) {
    AssociationConfig cfg;
    cfg.alpha = alpha;
    cfg.min_hits = 2;
    cfg.max_age = 30;
    if (alpha == 1.0) cfg.gate_dist = 0.0;  // pure-2D configuration
    MultiObjectTracker tracker(cfg);

    std::map<int, std::set<int>> subject_tracks;  // subject -> track ids
    const double f_px = 1000.0;
    for (int f = 0; f < 60; ++f) {
      const double t = f * 0.05;
      const double phase = (f < 25) ? t : (2.0 * 25 * 0.05 - t);  // reverse at f=25
      // Subject A at depth 4 moving +x; subject B at depth 6 moving -x.
      const Eigen::Vector3d root_a(-1.0 + 1.2 * phase, 0.0, 4.0);
      const Eigen::Vector3d root_b(1.0 - 1.2 * phase, 0.0, 6.0);
      std::vector<DetectionInput> dets;
      std::vector<int> subject;
      const bool blackout = f >= 20 && f < 30;
      if (!blackout) {
        for (int s = 0; s < 2; ++s) {
          const Eigen::Vector3d& root = s == 0 ? root_a : root_b;
          const double u = 500.0 + f_px * root.x() / root.z();
          const double w = f_px * 0.5 / root.z();
          const double h = f_px * 1.7 / root.z();
          dets.push_back(det({u - w / 2, 400 - h / 2, u + w / 2, 400 + h / 2}, 1.0, root));
          subject.push_back(s);
        }
      }
      const auto out = tracker.step(dets, RigidPose{}, 0.05);
      for (const auto& to : out) {
        // Attribute the emitted track to the nearest subject root.
        if (!to.world_root) continue;
        const int s = ((*to.world_root - root_a).norm() < (*to.world_root - root_b).norm())
                          ? 0
                          : 1;
        subject_tracks[s].insert(to.id);
      }
    }
    int switches = 0;
    for (const auto& [s, ids] : subject_tracks) switches += static_cast<int>(ids.size()) - 1;
    return switches;
  };
  const int switches_3d = run(0.3);
  const int switches_iou = run(1.0);
  CHECK(switches_3d == 0);
  CHECK(switches_iou >= 1);
}

TEST_CASE("tracker: alpha=1 with infinite gate matches a pure-IoU tracker") {
  AssociationConfig cfg3d;
  cfg3d.alpha = 1.0;
  cfg3d.gate_dist = std::numeric_limits<double>::infinity();
  AssociationConfig cfg2d = cfg3d;

  Rng rng(21);
  MultiObjectTracker with_roots(cfg3d);
  MultiObjectTracker without_roots(cfg2d);
  for (int f = 0; f < 40; ++f) {
    std::vector<DetectionInput> with_r, without_r;
    for (int s = 0; s < 2; ++s) {
      const double x = 80.0 * s + 2.5 * f + rng.uniform(-1, 1);
      const Bbox b{x, 30, x + 30, 110};
      with_r.push_back(det(b, 1.0, Eigen::Vector3d(s * 2.0, 0, 5)));
      without_r.push_back(det(b, 1.0));
    }
    const auto a = with_roots.step(with_r, RigidPose{}, 0.05);
    const auto b = without_roots.step(without_r, RigidPose{}, 0.05);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].bbox.x1 == doctest::Approx(b[i].bbox.x1));
    }
  }
}

TEST_CASE("association is invariant under a global rigid world transform") {
  Rng rng(31);
  RigidPose world_shift;
  world_shift.rotation = axis_angle_to_matrix({0.0, 1.1, 0.0});
  world_shift.translation = {5.0, 0.0, -3.0};

  AssociationConfig cfg;
  const Bbox pb{0, 0, 10, 10};
  const Bbox db{2, 0, 12, 10};
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d pr(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d dr(rng.normal(), rng.normal(), rng.normal());
    const double before = association_cost(pb, pr, db, dr, cfg);
    const double after = association_cost(pb, world_shift.apply(pr), db,
                                          world_shift.apply(dr), cfg);
    CHECK(before == doctest::Approx(after).epsilon(1e-9));
  }
}

TEST_CASE("simple_baseline_root: depth averaging and back projection") {
  CameraIntrinsics k;
  k.fx = k.fy = 500.0;
  k.cx = k.cy = 250.0;
  k.width = k.height = 500;

  SUBCASE("constant depth map") {
    DepthMap depth;
    depth.values = Eigen::MatrixXd::Constant(500, 500, 4.0);
    const Eigen::Vector3d root = simple_baseline_root({100, 100, 200, 200}, depth, k, 1.0);
    CHECK(root.z() == doctest::Approx(4.0));
    // bbox center (150, 150) back-projected at depth 4
    CHECK(root.x() == doctest::Approx((150.0 - 250.0) / 500.0 * 4.0));
    CHECK(root.y() == doctest::Approx((150.0 - 250.0) / 500.0 * 4.0));
  }

  SUBCASE("two half planes average") {
    DepthMap depth;
    depth.values = Eigen::MatrixXd::Constant(500, 500, 2.0);
    depth.values.rightCols(250).setConstant(6.0);
    const Eigen::Vector3d root = simple_baseline_root({150, 100, 350, 200}, depth, k, 1.0);
    CHECK(root.z() == doctest::Approx(4.0));
  }

  SUBCASE("scale factor applies") {
    DepthMap depth;
    depth.values = Eigen::MatrixXd::Constant(500, 500, 4.0);
    const Eigen::Vector3d root = simple_baseline_root({0, 0, 10, 10}, depth, k, 0.5);
    CHECK(root.z() == doctest::Approx(2.0));
  }

  SUBCASE("empty bbox throws") {
    DepthMap depth;
    depth.values = Eigen::MatrixXd::Constant(10, 10, 1.0);
    CHECK_THROWS_WITH_AS(simple_baseline_root({20, 20, 30, 30}, depth, k, 1.0),
                         doctest::Contains("EmptyBbox"), Error);
  }
}
