#include "ego3d/tracker.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ego3d/assignment.hpp"

namespace ego3d {

KalmanFilter::KalmanFilter(Eigen::VectorXd x0, Eigen::MatrixXd p0)
    : x_(std::move(x0)), p_(std::move(p0)) {}

void KalmanFilter::predict(const Eigen::MatrixXd& f, const Eigen::MatrixXd& q) {
  x_ = f * x_;
  p_ = f * p_ * f.transpose() + q;
  p_ = 0.5 * (p_ + p_.transpose().eval());
}

void KalmanFilter::update(const Eigen::VectorXd& z, const Eigen::MatrixXd& h,
                          const Eigen::MatrixXd& r) {
  const Eigen::VectorXd innovation = z - h * x_;
  const Eigen::MatrixXd s = h * p_ * h.transpose() + r;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  const double d_max = ldlt.vectorD().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(d_max, 1.0))
    throw Error(ErrorCode::SingularInnovation, "innovation covariance not invertible");
  const Eigen::MatrixXd gain = ldlt.solve(h * p_.transpose()).transpose();
  x_ += gain * innovation;
  const Eigen::MatrixXd ikh =
      Eigen::MatrixXd::Identity(p_.rows(), p_.cols()) - gain * h;
  p_ = ikh * p_ * ikh.transpose() + gain * r * gain.transpose();
  p_ = 0.5 * (p_ + p_.transpose().eval());
}

namespace {

// bbox <-> [u, v, s, r] with s = area, r = aspect ratio.
Eigen::Vector4d bbox_to_z(const Bbox& b) {
  const double w = b.width(), h = b.height();
  return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), w * h, w / h};
}

Bbox z_to_bbox(const Eigen::Vector4d& z) {
  const double s = std::max(z(2), 1e-6);
  const double r = std::max(z(3), 1e-6);
  const double w = std::sqrt(s * r);
  const double h = s / w;
  return {z(0) - 0.5 * w, z(1) - 0.5 * h, z(0) + 0.5 * w, z(1) + 0.5 * h};
}

}  // namespace

BboxKalman::BboxKalman(const Bbox& first)
    : kf_((Eigen::VectorXd(7) << bbox_to_z(first), 0, 0, 0).finished(), [] {
        Eigen::VectorXd d(7);
        d << 10, 10, 10, 10, 1e4, 1e4, 1e4;  // SORT initial covariance
        return Eigen::MatrixXd(d.asDiagonal());
      }()) {}

void BboxKalman::predict(double dt) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(7, 7);
  f(0, 4) = dt;
  f(1, 5) = dt;
  f(2, 6) = dt;
  Eigen::VectorXd q(7);
  q << 1, 1, 1, 1, 0.01, 0.01, 1e-4;  // SORT process noise
  kf_.predict(f, q.asDiagonal());
}

void BboxKalman::update(const Bbox& measurement) {
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(4, 7);
  Eigen::VectorXd r(4);
  r << 1, 1, 10, 10;  // SORT measurement noise
  kf_.update(bbox_to_z(measurement), h, r.asDiagonal());
}

Bbox BboxKalman::predicted_bbox() const { return z_to_bbox(kf_.state().head<4>()); }

PointKalman::PointKalman(const Eigen::Vector3d& first, double measurement_std,
                         double accel_std)
    : kf_((Eigen::VectorXd(6) << first, Eigen::Vector3d::Zero()).finished(), [&] {
        Eigen::VectorXd d(6);
        const double m2 = measurement_std * measurement_std;
        d << m2, m2, m2, 100, 100, 100;  // velocity unknown at start
        return Eigen::MatrixXd(d.asDiagonal());
      }()),
      measurement_std_(measurement_std),
      accel_std_(accel_std) {}

void PointKalman::predict(double dt) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(6, 6);
  for (int a = 0; a < 3; ++a) f(a, a + 3) = dt;
  // Piecewise-constant white acceleration noise per axis.
  const double q2 = accel_std_ * accel_std_;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(6, 6);
  const double dt2 = dt * dt;
  for (int a = 0; a < 3; ++a) {
    q(a, a) = 0.25 * dt2 * dt2 * q2;
    q(a, a + 3) = q(a + 3, a) = 0.5 * dt2 * dt * q2;
    q(a + 3, a + 3) = dt2 * q2;
  }
  kf_.predict(f, q);
}

void PointKalman::update(const Eigen::Vector3d& measurement) {
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(3, 6);
  kf_.update(measurement, h,
             measurement_std_ * measurement_std_ * Eigen::MatrixXd::Identity(3, 3));
}

void DetectionInput::validate() const {
  if (!(bbox.x2 > bbox.x1) || !(bbox.y2 > bbox.y1))
    throw Error(ErrorCode::InvalidConfig, "detection bbox is empty");
}

void AssociationConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0)
    throw Error(ErrorCode::InvalidConfig, "alpha must lie in [0, 1]");
  if (!(dist_scale > 0.0))
    throw Error(ErrorCode::InvalidConfig, "dist_scale must be positive");
  if (max_age < 0 || min_hits < 1)
    throw Error(ErrorCode::InvalidConfig, "bad lifecycle constants");
}

Track::Track(int track_id, const DetectionInput& det,
             const std::optional<Eigen::Vector3d>& world_root)
    : id(track_id), kf2d(det.bbox) {
  if (world_root) kf3d.emplace(*world_root);
}

Eigen::Vector3d to_world(const Eigen::Vector3d& root_cam, const RigidPose& cam_pose) {
  return cam_pose.rotation.transpose() * (root_cam - cam_pose.translation);
}

double association_cost(const Bbox& predicted_bbox,
                        const std::optional<Eigen::Vector3d>& predicted_root,
                        const Bbox& det_bbox,
                        const std::optional<Eigen::Vector3d>& det_world_root,
                        const AssociationConfig& cfg) {
  const double overlap = iou(predicted_bbox, det_bbox);
  if (!predicted_root || !det_world_root) {
    // Pure-2D fallback; only the IoU gate can admit the pair.
    if (overlap < cfg.gate_iou) return std::numeric_limits<double>::infinity();
    return 1.0 - overlap;
  }
  const double dist = (*predicted_root - *det_world_root).norm();
  if (overlap < cfg.gate_iou && dist > cfg.gate_dist)
    return std::numeric_limits<double>::infinity();
  return cfg.alpha * (1.0 - overlap) +
         (1.0 - cfg.alpha) * std::min(dist / cfg.dist_scale, 1.0);
}

MultiObjectTracker::MultiObjectTracker(AssociationConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::vector<TrackOutput> MultiObjectTracker::step(
    const std::vector<DetectionInput>& detections, const RigidPose& cam_pose, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be positive");
  for (const auto& d : detections) d.validate();
  ++frame_count_;

  for (Track& t : tracks_) {
    t.kf2d.predict(dt);
    if (t.kf3d) t.kf3d->predict(dt);
    ++t.age;
    ++t.time_since_update;
  }

  std::vector<std::optional<Eigen::Vector3d>> det_world(detections.size());
  for (std::size_t d = 0; d < detections.size(); ++d)
    if (detections[d].root_cam)
      det_world[d] = to_world(*detections[d].root_cam, cam_pose);

  // Gated cost matrix -> Hungarian. Forbidden pairs carry kForbiddenCost and
  // are stripped from the assignment by the solver.
  Eigen::MatrixXd cost(tracks_.size(), detections.size());
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    const Bbox pred = tracks_[t].kf2d.predicted_bbox();
    const std::optional<Eigen::Vector3d> pred_root =
        tracks_[t].kf3d ? std::optional<Eigen::Vector3d>(tracks_[t].kf3d->predicted_point())
                        : std::nullopt;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const double c =
          association_cost(pred, pred_root, detections[d].bbox, det_world[d], cfg_);
      cost(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) =
          std::isfinite(c) ? c : kForbiddenCost;
    }
  }
  const std::vector<int> match = solve_assignment(cost);

  std::vector<bool> det_used(detections.size(), false);
  std::vector<double> track_score(tracks_.size(), 0.0);
  std::vector<Bbox> track_bbox(tracks_.size());
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    const int d = match.empty() ? -1 : match[t];
    if (d < 0) continue;
    det_used[static_cast<std::size_t>(d)] = true;
    Track& trk = tracks_[t];
    track_bbox[t] = detections[static_cast<std::size_t>(d)].bbox;
    trk.kf2d.update(detections[static_cast<std::size_t>(d)].bbox);
    if (det_world[static_cast<std::size_t>(d)]) {
      if (trk.kf3d)
        trk.kf3d->update(*det_world[static_cast<std::size_t>(d)]);
      else
        trk.kf3d.emplace(*det_world[static_cast<std::size_t>(d)]);
    }
    ++trk.hits;
    trk.time_since_update = 0;
    track_score[t] = detections[static_cast<std::size_t>(d)].score;
    if (trk.status == TrackStatus::Tentative && trk.hits >= cfg_.min_hits)
      trk.status = TrackStatus::Confirmed;
  }

  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (det_used[d] || detections[d].score < cfg_.score_threshold) continue;
    Track t(next_id_++, detections[d], det_world[d]);
    if (cfg_.min_hits <= 1) t.status = TrackStatus::Confirmed;
    tracks_.push_back(std::move(t));
    track_score.push_back(detections[d].score);
    track_bbox.push_back(detections[d].bbox);
  }

  std::vector<TrackOutput> out;
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    Track& trk = tracks_[t];
    if (trk.time_since_update > cfg_.max_age) trk.status = TrackStatus::Dead;
    if (trk.time_since_update != 0) continue;
    // Early frames are emitted before confirmation (SORT convention), so a
    // clean sequence scores perfectly from frame one.
    if (trk.status == TrackStatus::Confirmed || frame_count_ <= cfg_.min_hits) {
      TrackOutput o;
      o.id = trk.id;
      // Report the matched detection's box; the filters drive prediction and
      // association, the 3D root is the temporally aggregated estimate.
      o.bbox = track_bbox[t];
      o.score = track_score[t];
      if (trk.kf3d) o.world_root = trk.kf3d->predicted_point();
      out.push_back(std::move(o));
    }
  }
  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Dead; });
  std::sort(out.begin(), out.end(),
            [](const TrackOutput& a, const TrackOutput& b) { return a.id < b.id; });
  return out;
}

Eigen::Vector3d simple_baseline_root(const Bbox& bbox, const DepthMap& depth,
                                     const CameraIntrinsics& intrinsics, double scale) {
  const int u0 = std::max(0, static_cast<int>(std::floor(bbox.x1)));
  const int v0 = std::max(0, static_cast<int>(std::floor(bbox.y1)));
  const int u1 = std::min(depth.width(), static_cast<int>(std::ceil(bbox.x2)));
  const int v1 = std::min(depth.height(), static_cast<int>(std::ceil(bbox.y2)));
  if (u0 >= u1 || v0 >= v1)
    throw Error(ErrorCode::EmptyBbox, "bbox covers no depth pixels");

  double sum = 0.0;
  for (int v = v0; v < v1; ++v)
    for (int u = u0; u < u1; ++u) sum += depth.values(v, u);
  const double mean_depth = scale * sum / (static_cast<double>(u1 - u0) * (v1 - v0));
  return backproject(intrinsics, bbox.center(), mean_depth);
}

}  // namespace ego3d
