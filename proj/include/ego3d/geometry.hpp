#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ego3d/errors.hpp"

namespace ego3d {

/// Pinhole intrinsics, pixels. No distortion model.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Eigen::Matrix3d matrix() const;
  void validate() const;  // throws InvalidConfig on broken invariants
};

/// Rigid camera-from-world transform: p_cam = R * p_world + t.
/// Right-handed, +z forward.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p_world) const {
    return rotation * p_world + translation;
  }
  RigidPose inverse() const;
  /// this ∘ other: apply `other` first, then `this`.
  RigidPose compose(const RigidPose& other) const;
  Eigen::Vector3d center() const;  // camera center in world coordinates

  /// R'R = I and det R = +1 within `tol` (Frobenius / absolute).
  bool is_valid_rotation(double tol = 1e-9) const;
  void validate(double tol = 1e-9) const;
};

/// P = K [R | t], defined up to positive scale.
struct ProjectionMatrix {
  Eigen::Matrix<double, 3, 4> m = Eigen::Matrix<double, 3, 4>::Zero();
};

/// x ↦ s R x + t with s > 0.
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
  SimilarityTransform inverse() const;
};

struct UmeyamaResult {
  SimilarityTransform transform;
  double residual = 0.0;  // sum of squared alignment errors
};

/// Camera identity + calibration bundle, as stored in camera JSON files.
struct CameraView {
  std::string id;
  CameraIntrinsics intrinsics;
  RigidPose pose;

  ProjectionMatrix projection() const;
};

/// Axis-aligned pixel box, (x1,y1) top-left, (x2,y2) bottom-right exclusive-ish.
struct Bbox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  Eigen::Vector2d center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }
};

double iou(const Bbox& a, const Bbox& b);

ProjectionMatrix compose_projection(const CameraIntrinsics& k, const RigidPose& pose);

/// Dehomogenized pinhole projection. Throws NonPositiveDepth when the
/// homogeneous w-component is <= 1e-12.
Eigen::Vector2d project(const ProjectionMatrix& p, const Eigen::Vector3d& x_world);

/// Camera-frame point on the ray through `pixel` at depth `z`.
Eigen::Vector3d backproject(const CameraIntrinsics& k, const Eigen::Vector2d& pixel,
                            double depth);

/// Least-squares similarity aligning src onto dst:
/// min over (s,R,t) of sum_i |dst_i - (s R src_i + t)|^2  (Umeyama closed form).
/// Throws DegenerateConfiguration for fewer than 3 or collinear points.
UmeyamaResult umeyama_align(const std::vector<Eigen::Vector3d>& src,
                            const std::vector<Eigen::Vector3d>& dst);

/// Two stacked 3-vectors -> SO(3) by Gram-Schmidt; third column by cross
/// product. Scale-invariant. Throws DegenerateInput when the first column is
/// zero or the columns are parallel within 1e-9.
Eigen::Matrix3d rot6d_to_matrix(const Eigen::Matrix<double, 6, 1>& r);

/// First two columns of R, stacked. Left inverse of rot6d_to_matrix.
Eigen::Matrix<double, 6, 1> matrix_to_rot6d(const Eigen::Matrix3d& r);

/// Rodrigues axis-angle (angle = |v|) to rotation matrix.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& v);

}  // namespace ego3d
