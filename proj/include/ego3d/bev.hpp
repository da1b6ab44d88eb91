#pragma once

#include <Eigen/Core>
#include <optional>

#include "ego3d/geometry.hpp"

namespace ego3d {

struct BevConfig {
  int bins_rho = 64;   // P
  int bins_phi = 64;   // Q
  double rho_min = 0.3;  // meters
  double rho_max = 10.0;
  double gaussian_sigma = 1.0;  // bins

  void validate() const;
};

/// P x Q nonnegative heatmap; row = log-rho bin, column = phi bin (circular).
struct BevHeatmap {
  Eigen::MatrixXd values;
};

/// Vertical-axis cylinder approximating a subject.
struct Cylinder3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // world, axis along +y
  double radius = 0.4;
  double height = 1.8;
};

/// Log-polar decode result: range/bearing plus the ground-plane point
/// (x = rho sin phi, z = rho cos phi) in the camera-centered frame.
struct BevDecoded {
  double rho = 0.0;
  double phi = 0.0;
  Eigen::Vector2d ground = Eigen::Vector2d::Zero();  // (x, z)
};

/// Unit-peak Gaussian blob at the (log rho, phi) bin of the camera-frame
/// root. The vertical component is dropped: rho = hypot(x, z),
/// phi = atan2(x, z). phi wraps circularly across the Q axis. Throws
/// OutOfRange when rho falls outside [rho_min, rho_max].
BevHeatmap encode_bev(const Eigen::Vector3d& root_cam, const BevConfig& cfg);

/// Argmax readout to bin centers; row-major index breaks ties. Throws
/// EmptyHeatmap when the max is not positive.
BevDecoded decode_bev(const BevHeatmap& h, const BevConfig& cfg);

/// Rotates a camera-frame point into a gravity-aligned frame sharing the
/// camera center (+y = world up, +z = the camera forward direction projected
/// onto the horizontal plane). Use before encode_bev when the camera tilts.
Eigen::Vector3d gravity_aligned_root(const Eigen::Vector3d& root_cam, const RigidPose& cam_pose,
                                     const Eigen::Vector3d& world_up = {0, 1, 0});

/// Projected bbox of sampled cylinder surface points (two cap rings of
/// `ring_samples` angles), clipped to the image. Empty when nothing lands in
/// front of the camera or the clip is empty.
std::optional<Bbox> cylinder_to_bbox(const Cylinder3D& c, const CameraView& cam,
                                     int ring_samples = 16);

/// Region proposal from an ego camera's world position: vertical cylinder
/// whose top sits `head_margin` above the camera, down to the ground plane
/// y = 0.
Cylinder3D head_pose_to_cylinder(const RigidPose& ego_cam_pose, double radius = 0.4,
                                 double head_margin = 0.15);

}  // namespace ego3d
