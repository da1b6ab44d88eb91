#include <doctest.h>

#include <Eigen/Dense>

#include "ego3d/metrics.hpp"
#include "ego3d/rng.hpp"
#include "oracles.hpp"

using namespace ego3d;

namespace {

Bbox box_at(double x, double y, double w = 10, double h = 10) {
  return {x, y, x + w, y + h};
}

MotSequence perfect_sequence(int frames, int objects) {
  MotSequence seq(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t)
    for (int o = 0; o < objects; ++o) {
      const Bbox b = box_at(20.0 * o + t, 15.0 * o);
      seq[static_cast<std::size_t>(t)].gt.push_back({o, b});
      seq[static_cast<std::size_t>(t)].pred.push_back({o + 100, b});
    }
  return seq;
}

}  // namespace

TEST_CASE("clear_mot: perfect, empty, and swapped") {
  const MotSequence perfect = perfect_sequence(6, 2);
  const ClearResult r = clear_mot(perfect, 0.5);
  CHECK(r.mota == doctest::Approx(1.0));
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
  CHECK(r.idsw == 0);

  MotSequence none = perfect;
  for (auto& f : none) f.pred.clear();
  const ClearResult r2 = clear_mot(none, 0.5);
  CHECK(r2.mota == doctest::Approx(0.0));
  CHECK(r2.fn == r2.gt_total);

  // 2 objects, 4 frames, predictions swap identities mid-sequence.
  MotSequence swap(4);
  for (int t = 0; t < 4; ++t) {
    const Bbox a = box_at(0, 0), b = box_at(50, 50);
    swap[static_cast<std::size_t>(t)].gt = {{0, a}, {1, b}};
    if (t < 2)
      swap[static_cast<std::size_t>(t)].pred = {{7, a}, {8, b}};
    else
      swap[static_cast<std::size_t>(t)].pred = {{8, a}, {7, b}};
  }
  const ClearResult r3 = clear_mot(swap, 0.5);
  CHECK(r3.idsw == 2);
  const oracles::ClearOracle o = oracles::clear_mot_oracle(swap, 0.5);
  CHECK(r3.mota == doctest::Approx(o.mota));
  CHECK(r3.fp == o.fp);
  CHECK(r3.fn == o.fn);
  CHECK(r3.idsw == o.idsw);

  CHECK_THROWS_WITH_AS(clear_mot({}, 0.5), doctest::Contains("EmptySequence"), Error);
}

TEST_CASE("clear_mot: MOTA identity holds on random sequences") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const MotSequence seq = oracles::random_mot_sequence(rng);
    const ClearResult r = clear_mot(seq, 0.5);
    if (r.gt_total > 0)
      CHECK(r.mota ==
            doctest::Approx(1.0 - static_cast<double>(r.fp + r.fn + r.idsw) / r.gt_total));
  }
}

TEST_CASE("idf1: perfect, empty, fresh ids every frame") {
  CHECK(idf1(perfect_sequence(5, 3), 0.5).idf1 == doctest::Approx(1.0));

  MotSequence none = perfect_sequence(5, 1);
  for (auto& f : none) f.pred.clear();
  CHECK(idf1(none, 0.5).idf1 == doctest::Approx(0.0));

  // One ground-truth object over N frames, a fresh predicted id per frame:
  // the expected value comes from the brute-force trajectory oracle.
  const int n = 6;
  MotSequence fresh(n);
  for (int t = 0; t < n; ++t) {
    const Bbox b = box_at(5.0 * t, 0);
    fresh[static_cast<std::size_t>(t)].gt = {{0, b}};
    fresh[static_cast<std::size_t>(t)].pred = {{10 + t, b}};
  }
  const double expect = oracles::idf1_oracle(fresh, 0.5);
  CHECK(expect == doctest::Approx(1.0 / n));  // IDTP=1, IDFP=IDFN=n-1
  CHECK(idf1(fresh, 0.5).idf1 == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("idf1 and hota are invariant to prediction id relabeling") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MotSequence seq = oracles::random_mot_sequence(rng);
    MotSequence relabeled = seq;
    for (auto& f : relabeled)
      for (auto& p : f.pred) p.id = 7919 - 3 * p.id;  // injective relabel
    CHECK(idf1(seq, 0.5).idf1 == doctest::Approx(idf1(relabeled, 0.5).idf1).epsilon(1e-12));
    CHECK(hota(seq).hota == doctest::Approx(hota(relabeled).hota).epsilon(1e-12));
  }
}

TEST_CASE("hota: perfect and empty") {
  const HotaResult perfect = hota(perfect_sequence(5, 2));
  CHECK(perfect.hota == doctest::Approx(1.0));
  CHECK(perfect.det_a == doctest::Approx(1.0));
  CHECK(perfect.ass_a == doctest::Approx(1.0));

  MotSequence none = perfect_sequence(4, 1);
  for (auto& f : none) f.pred.clear();
  CHECK(hota(none).hota == doctest::Approx(0.0));
}

TEST_CASE("hota: constructed 3-object 5-frame case matches the oracle") {
  // Two solid tracks, one id swap, one missing object, one spurious box.
  MotSequence seq(5);
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    auto& f = seq[static_cast<std::size_t>(t)];
    for (int o = 0; o < 3; ++o) f.gt.push_back({o, box_at(30.0 * o + 2 * t, 10.0 * o)});
    f.pred.push_back({0, box_at(2 * t + 1.0, 1.0)});
    if (t != 2) f.pred.push_back({t < 2 ? 1 : 5, box_at(30.0 + 2 * t - 1.0, 10.0)});
    if (t == 4) f.pred.push_back({9, box_at(90, 90)});
  }
  const HotaResult got = hota(seq);
  const oracles::HotaOracle expect = oracles::hota_oracle(seq);
  CHECK(got.hota == doctest::Approx(expect.hota).epsilon(1e-9));
  CHECK(got.det_a == doctest::Approx(expect.det_a).epsilon(1e-9));
  CHECK(got.ass_a == doctest::Approx(expect.ass_a).epsilon(1e-9));
}

TEST_CASE("metrics match brute-force oracles on a randomized corpus") {
  Rng rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const MotSequence seq = oracles::random_mot_sequence(rng);
    const ClearResult c = clear_mot(seq, 0.5);
    const oracles::ClearOracle co = oracles::clear_mot_oracle(seq, 0.5);
    CHECK(c.fp == co.fp);
    CHECK(c.fn == co.fn);
    CHECK(c.idsw == co.idsw);
    CHECK(c.mota == doctest::Approx(co.mota).epsilon(1e-9));
    CHECK(idf1(seq, 0.5).idf1 == doctest::Approx(oracles::idf1_oracle(seq, 0.5)).epsilon(1e-9));
    const HotaResult h = hota(seq);
    const oracles::HotaOracle ho = oracles::hota_oracle(seq);
    CHECK(h.hota == doctest::Approx(ho.hota).epsilon(1e-9));
  }
}

TEST_CASE("pose_metrics: offsets and Procrustes alignment") {
  Rng rng(5);
  Eigen::MatrixX3d gt(17, 3);
  for (int j = 0; j < 17; ++j)
    gt.row(j) = Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());

  SUBCASE("identical inputs score zero") {
    const PoseMetrics m = pose_metrics(gt, gt);
    CHECK(m.mpjpe == doctest::Approx(0.0));
    CHECK(m.pa_mpjpe == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("uniform offset: MPJPE is the offset norm, PA-MPJPE zero") {
    const Eigen::RowVector3d d(0.3, -0.1, 0.2);
    const Eigen::MatrixX3d pred = gt.rowwise() + d;
    const PoseMetrics m = pose_metrics(pred, gt);
    CHECK(m.mpjpe == doctest::Approx(d.norm()));
    CHECK(m.pa_mpjpe == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("similarity transform washes out under PA") {
    const double s = 1.4;
    const Eigen::Matrix3d rot = axis_angle_to_matrix({0.4, 0.2, -0.7});
    const Eigen::RowVector3d t(2.0, -1.0, 0.5);
    Eigen::MatrixX3d noise(17, 3);
    for (int j = 0; j < 17; ++j)
      noise.row(j) = 0.01 * Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());

    const Eigen::MatrixX3d pred = (s * (gt * rot.transpose())).rowwise() + t + noise;
    // Equivalent un-transformed perturbation: noise carried back through the
    // similarity; PA-MPJPE of both constructions must agree (same orbit).
    const Eigen::MatrixX3d equiv = gt + noise * rot / s;
    const PoseMetrics a = pose_metrics(pred, gt);
    const PoseMetrics b = pose_metrics(equiv, gt);
    CHECK(a.pa_mpjpe == doctest::Approx(b.pa_mpjpe).epsilon(1e-6));
    // And alignment can only reduce error vs the rigidly-corrected baseline.
    CHECK(a.pa_mpjpe <= 0.01 * 3.0 / s + 1e-6);
  }

  SUBCASE("mask excludes joints from both metrics") {
    Eigen::MatrixX3d pred = gt;
    pred.row(0) += Eigen::RowVector3d(100, 0, 0);  // huge error behind the mask
    std::vector<bool> valid(17, true);
    valid[0] = false;
    const PoseMetrics m = pose_metrics(pred, gt, &valid);
    CHECK(m.mpjpe == doctest::Approx(0.0));
  }

  SUBCASE("shape mismatch throws") {
    Eigen::MatrixX3d small(5, 3);
    small.setZero();
    CHECK_THROWS_WITH_AS(pose_metrics(small, gt), doctest::Contains("ShapeMismatch"), Error);
  }
}

TEST_CASE("chamfer: trivial values and the naive oracle") {
  const std::vector<Eigen::Vector3d> a = {{0, 0, 0}};
  const std::vector<Eigen::Vector3d> b = {{1, 0, 0}};
  CHECK(chamfer_bidirectional(a, a) == doctest::Approx(0.0));
  CHECK(chamfer_bidirectional(a, b) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(chamfer_bidirectional({}, b), doctest::Contains("EmptySet"), Error);

  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Eigen::Vector3d> p, q;
    for (int i = 0; i < 120; ++i) p.emplace_back(rng.normal(), rng.normal(), rng.normal());
    for (int i = 0; i < 90; ++i)
      q.emplace_back(rng.normal() + 0.5, rng.normal(), rng.normal());
    CHECK(chamfer_bidirectional(p, q) ==
          doctest::Approx(oracles::chamfer_naive(p, q)).epsilon(1e-12));
  }
}

TEST_CASE("chamfer: invariant under a joint rigid transform") {
  Rng rng(19);
  std::vector<Eigen::Vector3d> p, q;
  for (int i = 0; i < 60; ++i) p.emplace_back(rng.normal(), rng.normal(), rng.normal());
  for (int i = 0; i < 45; ++i) q.emplace_back(rng.normal(), rng.normal(), rng.normal());
  const Eigen::Matrix3d rot = axis_angle_to_matrix({0.3, -0.5, 0.2});
  const Eigen::Vector3d t(1, 2, 3);
  std::vector<Eigen::Vector3d> p2, q2;
  for (const auto& x : p) p2.push_back(rot * x + t);
  for (const auto& x : q) q2.push_back(rot * x + t);
  CHECK(chamfer_bidirectional(p, q) ==
        doctest::Approx(chamfer_bidirectional(p2, q2)).epsilon(1e-9));
}
