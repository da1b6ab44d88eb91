#include "ego3d/triangulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "ego3d/rng.hpp"

namespace ego3d {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kCenterTol = 1e-9;  // meters

const ProjectionMatrix& camera_for(const CameraMap& cams, const std::string& id) {
  const auto it = cams.find(id);
  if (it == cams.end())
    throw Error(ErrorCode::MissingInput, "no projection matrix for camera " + id);
  return it->second;
}

Eigen::Vector3d camera_center(const ProjectionMatrix& p) {
  // Right null vector of P, dehomogenized. Finite for any full-rank left block.
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 4>> svd(p.m, Eigen::ComputeFullV);
  const Eigen::Vector4d c = svd.matrixV().col(3);
  if (std::abs(c(3)) < 1e-14)
    throw Error(ErrorCode::DegenerateGeometry, "camera center at infinity");
  return c.head<3>() / c(3);
}

double reprojection_error(const ProjectionMatrix& p, const Eigen::Vector3d& x,
                          const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d h = p.m * x.homogeneous();
  if (h.z() <= 1e-12) return std::numeric_limits<double>::infinity();
  return (h.hnormalized() - pixel).norm();
}

std::vector<Observation2D> drop_low_confidence(const std::vector<Observation2D>& obs,
                                               double min_confidence) {
  std::vector<Observation2D> kept;
  kept.reserve(obs.size());
  for (const auto& o : obs)
    if (o.confidence >= min_confidence) kept.push_back(o);
  return kept;
}

struct Hypothesis {
  std::size_t a = 0, b = 0;  // observation indices of the minimal sample
  std::vector<std::size_t> inliers;
  double mean_error = std::numeric_limits<double>::infinity();
};

}  // namespace

void RansacConfig::validate() const {
  if (min_inliers < 2)
    throw Error(ErrorCode::InvalidConfig, "min_inliers must be >= 2");
  if (!(inlier_threshold > 0.0))
    throw Error(ErrorCode::InvalidConfig, "inlier_threshold must be positive");
  if (max_iterations < 1)
    throw Error(ErrorCode::InvalidConfig, "max_iterations must be >= 1");
}

Eigen::Vector3d dlt_triangulate(const std::vector<Observation2D>& obs,
                                const CameraMap& cams) {
  std::set<std::string> distinct;
  for (const auto& o : obs) distinct.insert(o.camera_id);
  if (obs.size() < 2 || distinct.size() < 2)
    throw Error(ErrorCode::InsufficientViews,
                "need observations from at least 2 distinct cameras");

  Eigen::MatrixXd a(2 * obs.size(), 4);
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const ProjectionMatrix& p = camera_for(cams, obs[i].camera_id);
    // Normalizing P makes the solution invariant to per-camera rescaling.
    const Eigen::Matrix<double, 3, 4> pn = p.m / p.m.norm();
    a.row(2 * i) = obs[i].point.x() * pn.row(2) - pn.row(0);
    a.row(2 * i + 1) = obs[i].point.y() * pn.row(2) - pn.row(1);
    centers.push_back(camera_center(p));
  }

  bool all_coincident = true;
  for (std::size_t i = 1; i < centers.size() && all_coincident; ++i)
    all_coincident = (centers[i] - centers[0]).norm() < kCenterTol;
  if (all_coincident)
    throw Error(ErrorCode::DegenerateGeometry, "all camera centers coincide");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A unique null direction needs exactly one vanishing singular value.
  if (sv(2) < kRankTol * sv(0))
    throw Error(ErrorCode::DegenerateGeometry, "triangulation system is rank-deficient");

  Eigen::Vector4d y = svd.matrixV().col(3);
  if (y(3) < 0.0) y = -y;
  if (y(3) < 1e-12)
    throw Error(ErrorCode::DegenerateGeometry, "triangulated point at infinity");
  return y.head<3>() / y(3);
}

TriangulationResult ransac_triangulate(const std::vector<Observation2D>& obs_in,
                                       const CameraMap& cams,
                                       const RansacConfig& cfg) {
  cfg.validate();
  const std::vector<Observation2D> obs = drop_low_confidence(obs_in, cfg.min_confidence);
  if (static_cast<int>(obs.size()) < cfg.min_inliers)
    throw Error(ErrorCode::InsufficientViews, "fewer observations than min_inliers");

  // Candidate minimal samples: all distinct-camera pairs in lexicographic
  // (camera_id_a, camera_id_b) order; thinned by seeded sampling when the
  // pair count exceeds the iteration budget. Fixed ordering keeps the
  // tie-break ("lower camera-id sample wins") well defined and the whole
  // procedure deterministic in rng_seed.
  std::vector<std::size_t> order(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return std::make_pair(obs[l].camera_id, l) < std::make_pair(obs[r].camera_id, r);
  });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j)
      if (obs[order[i]].camera_id != obs[order[j]].camera_id)
        pairs.emplace_back(order[i], order[j]);
  if (pairs.size() > static_cast<std::size_t>(cfg.max_iterations)) {
    Rng rng(cfg.rng_seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.max_iterations); ++i) {
      const std::size_t j = i + rng.index(pairs.size() - i);
      std::swap(pairs[i], pairs[j]);
    }
    pairs.resize(static_cast<std::size_t>(cfg.max_iterations));
    std::sort(pairs.begin(), pairs.end(), [&](const auto& l, const auto& r) {
      return std::make_tuple(obs[l.first].camera_id, obs[l.second].camera_id, l) <
             std::make_tuple(obs[r.first].camera_id, obs[r.second].camera_id, r);
    });
  }

  Hypothesis best;
  bool have_best = false;
  for (const auto& [ia, ib] : pairs) {
    Eigen::Vector3d candidate;
    try {
      candidate = dlt_triangulate({obs[ia], obs[ib]}, cams);
    } catch (const Error&) {
      continue;  // degenerate sample
    }
    Hypothesis h;
    h.a = ia;
    h.b = ib;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double e = reprojection_error(camera_for(cams, obs[i].camera_id),
                                          candidate, obs[i].point);
      if (e <= cfg.inlier_threshold) {
        h.inliers.push_back(i);
        err_sum += e;
      }
    }
    if (h.inliers.empty()) continue;
    h.mean_error = err_sum / static_cast<double>(h.inliers.size());
    const bool better =
        !have_best || h.inliers.size() > best.inliers.size() ||
        (h.inliers.size() == best.inliers.size() && h.mean_error < best.mean_error);
    if (better) {
      best = h;
      have_best = true;
    }
    if (have_best && best.inliers.size() == obs.size()) break;  // full consensus
  }

  if (!have_best || static_cast<int>(best.inliers.size()) < cfg.min_inliers)
    throw Error(ErrorCode::NoConsensus, "no hypothesis reached min_inliers");

  std::vector<Observation2D> inlier_obs;
  inlier_obs.reserve(best.inliers.size());
  for (const std::size_t i : best.inliers) inlier_obs.push_back(obs[i]);

  TriangulationResult out;
  out.point = dlt_triangulate(inlier_obs, cams);
  double err_sum = 0.0;
  for (const auto& o : inlier_obs) {
    out.inliers.push_back(o.camera_id);
    err_sum += reprojection_error(camera_for(cams, o.camera_id), out.point, o.point);
  }
  std::sort(out.inliers.begin(), out.inliers.end());
  out.mean_reprojection_error = err_sum / static_cast<double>(inlier_obs.size());
  return out;
}

PoseTriangulation triangulate_pose(const std::map<std::string, KeypointSet>& keypoints,
                                   const CameraMap& cams, const RansacConfig& cfg) {
  Eigen::Index joints = -1;
  for (const auto& [id, set] : keypoints) {
    if (set.points.rows() != set.confidence.size())
      throw Error(ErrorCode::ShapeMismatch, "keypoints/confidence length mismatch");
    if (joints < 0)
      joints = set.points.rows();
    else if (set.points.rows() != joints)
      throw Error(ErrorCode::ShapeMismatch,
                  "joint count differs between cameras (" + id + ")");
  }
  if (joints <= 0) throw Error(ErrorCode::InsufficientViews, "no keypoints supplied");

  PoseTriangulation out;
  out.joints = Eigen::MatrixX3d::Zero(joints, 3);
  out.valid.assign(static_cast<std::size_t>(joints), false);
  out.details.resize(static_cast<std::size_t>(joints));

  bool any = false;
  for (Eigen::Index j = 0; j < joints; ++j) {
    std::vector<Observation2D> obs;
    for (const auto& [id, set] : keypoints)
      obs.push_back({id, set.points.row(j).transpose(), set.confidence(j)});
    try {
      TriangulationResult r = ransac_triangulate(obs, cams, cfg);
      out.joints.row(j) = r.point.transpose();
      out.valid[static_cast<std::size_t>(j)] = true;
      out.details[static_cast<std::size_t>(j)] = std::move(r);
      any = true;
    } catch (const Error&) {
      // joint stays invalid; other joints are unaffected
    }
  }
  if (!any)
    throw Error(ErrorCode::InsufficientViews, "no joint could be triangulated");
  return out;
}

}  // namespace ego3d
