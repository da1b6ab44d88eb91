#include "ego3d/bev.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace ego3d {

void BevConfig::validate() const {
  if (bins_rho < 2 || bins_phi < 2)
    throw Error(ErrorCode::InvalidConfig, "need at least 2 bins per axis");
  if (!(rho_min > 0.0) || !(rho_max > rho_min))
    throw Error(ErrorCode::InvalidConfig, "need 0 < rho_min < rho_max");
  if (!(gaussian_sigma > 0.0))
    throw Error(ErrorCode::InvalidConfig, "gaussian_sigma must be positive");
}

namespace {

// Bin centers: log-rho bin i covers [lmin + i*d, lmin + (i+1)*d), center at
// i + 0.5. Phi bin centers sit at -pi + j * (2*pi / Q), so bin Q/2 is exactly
// straight ahead; the axis wraps.
double log_rho_bin_width(const BevConfig& cfg) {
  return (std::log(cfg.rho_max) - std::log(cfg.rho_min)) / cfg.bins_rho;
}

int log_rho_bin(double rho, const BevConfig& cfg) {
  const double u = (std::log(rho) - std::log(cfg.rho_min)) / log_rho_bin_width(cfg);
  return std::clamp(static_cast<int>(std::floor(u)), 0, cfg.bins_rho - 1);
}

int phi_bin(double phi, const BevConfig& cfg) {
  const double width = 2.0 * M_PI / cfg.bins_phi;
  const int j = static_cast<int>(std::lround((phi + M_PI) / width));
  return ((j % cfg.bins_phi) + cfg.bins_phi) % cfg.bins_phi;
}

}  // namespace

BevHeatmap encode_bev(const Eigen::Vector3d& root_cam, const BevConfig& cfg) {
  cfg.validate();
  const double rho = std::hypot(root_cam.x(), root_cam.z());
  if (rho < cfg.rho_min || rho > cfg.rho_max)
    throw Error(ErrorCode::OutOfRange, "root range outside [rho_min, rho_max]");
  const double phi = std::atan2(root_cam.x(), root_cam.z());

  const int ci = log_rho_bin(rho, cfg);
  const int cj = phi_bin(phi, cfg);
  const double inv2s2 = 1.0 / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma);

  BevHeatmap h;
  h.values.resize(cfg.bins_rho, cfg.bins_phi);
  for (int i = 0; i < cfg.bins_rho; ++i) {
    const double di = i - ci;
    for (int j = 0; j < cfg.bins_phi; ++j) {
      int dj = std::abs(j - cj);
      dj = std::min(dj, cfg.bins_phi - dj);  // circular distance
      h.values(i, j) = std::exp(-(di * di + dj * dj) * inv2s2);
    }
  }
  return h;
}

BevDecoded decode_bev(const BevHeatmap& h, const BevConfig& cfg) {
  cfg.validate();
  if (h.values.rows() != cfg.bins_rho || h.values.cols() != cfg.bins_phi)
    throw Error(ErrorCode::ShapeMismatch, "heatmap size does not match config");

  int best_i = 0, best_j = 0;
  double best = -1.0;
  for (int i = 0; i < cfg.bins_rho; ++i)
    for (int j = 0; j < cfg.bins_phi; ++j)
      if (h.values(i, j) > best) {
        best = h.values(i, j);
        best_i = i;
        best_j = j;
      }
  if (!(best > 0.0))
    throw Error(ErrorCode::EmptyHeatmap, "heatmap has no positive entry");

  BevDecoded out;
  out.rho = std::exp(std::log(cfg.rho_min) + (best_i + 0.5) * log_rho_bin_width(cfg));
  out.phi = -M_PI + best_j * (2.0 * M_PI / cfg.bins_phi);
  out.ground = {out.rho * std::sin(out.phi), out.rho * std::cos(out.phi)};
  return out;
}

Eigen::Vector3d gravity_aligned_root(const Eigen::Vector3d& root_cam, const RigidPose& cam_pose,
                                     const Eigen::Vector3d& world_up) {
  const Eigen::Matrix3d r_wc = cam_pose.rotation.transpose();  // camera -> world
  const Eigen::Vector3d v_world = r_wc * root_cam;
  const Eigen::Vector3d up = world_up.normalized();
  Eigen::Vector3d forward = r_wc.col(2) - (r_wc.col(2).dot(up)) * up;
  if (forward.norm() < 1e-9)
    throw Error(ErrorCode::DegenerateGeometry, "camera looks along gravity");
  forward.normalize();
  const Eigen::Vector3d right = up.cross(forward);
  return {right.dot(v_world), up.dot(v_world), forward.dot(v_world)};
}

std::optional<Bbox> cylinder_to_bbox(const Cylinder3D& c, const CameraView& cam,
                                     int ring_samples) {
  const ProjectionMatrix p = cam.projection();
  bool any = false;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  for (int ring = 0; ring < 2; ++ring) {
    const double y = c.center.y() + (ring == 0 ? -0.5 : 0.5) * c.height;
    for (int k = 0; k < ring_samples; ++k) {
      const double ang = 2.0 * M_PI * k / ring_samples;
      const Eigen::Vector3d pt(c.center.x() + c.radius * std::cos(ang), y,
                               c.center.z() + c.radius * std::sin(ang));
      const Eigen::Vector3d h = p.m * pt.homogeneous();
      if (h.z() <= 1e-12) continue;  // behind the camera
      const Eigen::Vector2d px = h.hnormalized();
      if (!any) {
        x1 = x2 = px.x();
        y1 = y2 = px.y();
        any = true;
      } else {
        x1 = std::min(x1, px.x());
        x2 = std::max(x2, px.x());
        y1 = std::min(y1, px.y());
        y2 = std::max(y2, px.y());
      }
    }
  }
  if (!any) return std::nullopt;
  Bbox box;
  box.x1 = std::max(x1, 0.0);
  box.y1 = std::max(y1, 0.0);
  box.x2 = std::min(x2, static_cast<double>(cam.intrinsics.width));
  box.y2 = std::min(y2, static_cast<double>(cam.intrinsics.height));
  if (box.x2 <= box.x1 || box.y2 <= box.y1) return std::nullopt;
  return box;
}

Cylinder3D head_pose_to_cylinder(const RigidPose& ego_cam_pose, double radius,
                                 double head_margin) {
  const Eigen::Vector3d cam_center = ego_cam_pose.center();
  Cylinder3D c;
  c.radius = radius;
  c.height = std::max(cam_center.y() + head_margin, head_margin);
  c.center = {cam_center.x(), 0.5 * c.height, cam_center.z()};
  return c;
}

}  // namespace ego3d
