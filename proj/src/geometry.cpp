#include "ego3d/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ego3d {

namespace {
constexpr double kSo3Tol = 1e-9;  // SO(3)/collinearity degeneracy tolerance
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw Error(ErrorCode::InvalidConfig, "focal lengths must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
    throw Error(ErrorCode::InvalidConfig, "principal point outside the image");
}

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(rotation.transpose() * translation);
  return inv;
}

RigidPose RigidPose::compose(const RigidPose& other) const {
  RigidPose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

Eigen::Vector3d RigidPose::center() const {
  return -(rotation.transpose() * translation);
}

bool RigidPose::is_valid_rotation(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).norm() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

void RigidPose::validate(double tol) const {
  if (!is_valid_rotation(tol))
    throw Error(ErrorCode::InvalidConfig, "rotation is not in SO(3)");
  if (!translation.allFinite())
    throw Error(ErrorCode::InvalidConfig, "translation is not finite");
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -(rotation.transpose() * translation) / scale;
  return inv;
}

ProjectionMatrix CameraView::projection() const {
  return compose_projection(intrinsics, pose);
}

double iou(const Bbox& a, const Bbox& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

ProjectionMatrix compose_projection(const CameraIntrinsics& k, const RigidPose& pose) {
  ProjectionMatrix p;
  p.m.leftCols<3>() = pose.rotation;
  p.m.col(3) = pose.translation;
  p.m = k.matrix() * p.m;
  return p;
}

Eigen::Vector2d project(const ProjectionMatrix& p, const Eigen::Vector3d& x_world) {
  const Eigen::Vector3d h = p.m * x_world.homogeneous();
  if (h.z() <= 1e-12)
    throw Error(ErrorCode::NonPositiveDepth, "point projects behind the camera");
  return h.hnormalized();
}

Eigen::Vector3d backproject(const CameraIntrinsics& k, const Eigen::Vector2d& pixel,
                            double depth) {
  return {(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
}

UmeyamaResult umeyama_align(const std::vector<Eigen::Vector3d>& src,
                            const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size())
    throw Error(ErrorCode::DegenerateConfiguration, "point lists differ in length");
  const auto n = static_cast<Eigen::Index>(src.size());
  if (n < 3)
    throw Error(ErrorCode::DegenerateConfiguration, "need at least 3 correspondences");

  Eigen::Vector3d mu_src = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_dst = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();  // dst-src cross covariance
  double var_src = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d ds = src[i] - mu_src;
    const Eigen::Vector3d dd = dst[i] - mu_dst;
    sigma += dd * ds.transpose();
    var_src += ds.squaredNorm();
  }
  sigma /= static_cast<double>(n);
  var_src /= static_cast<double>(n);

  // Collinearity check on the source spread: a degenerate (rank < 2) source
  // leaves the rotation unconstrained about the line axis.
  {
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d ds = src[i] - mu_src;
      scatter += ds * ds.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    const double largest = eig.eigenvalues()(2);
    if (largest <= kSo3Tol || eig.eigenvalues()(1) <= kSo3Tol * largest)
      throw Error(ErrorCode::DegenerateConfiguration, "source points are collinear");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s_fix = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0)
    s_fix(2) = -1.0;

  UmeyamaResult out;
  out.transform.rotation =
      svd.matrixU() * s_fix.asDiagonal() * svd.matrixV().transpose();
  out.transform.scale = svd.singularValues().dot(s_fix) / var_src;
  if (!(out.transform.scale > 0.0))
    throw Error(ErrorCode::DegenerateConfiguration, "non-positive recovered scale");
  out.transform.translation = mu_dst - out.transform.scale * (out.transform.rotation * mu_src);

  for (Eigen::Index i = 0; i < n; ++i)
    out.residual += (dst[i] - out.transform.apply(src[i])).squaredNorm();
  return out;
}

Eigen::Matrix3d rot6d_to_matrix(const Eigen::Matrix<double, 6, 1>& r) {
  const Eigen::Vector3d a1 = r.head<3>();
  const Eigen::Vector3d a2 = r.tail<3>();
  const double n1 = a1.norm();
  if (n1 < kSo3Tol)
    throw Error(ErrorCode::DegenerateInput, "first 6d column is zero");
  const Eigen::Vector3d b1 = a1 / n1;
  const Eigen::Vector3d u2 = a2 - b1.dot(a2) * b1;
  const double n2 = u2.norm();
  if (n2 < kSo3Tol)
    throw Error(ErrorCode::DegenerateInput, "6d columns are parallel");
  const Eigen::Vector3d b2 = u2 / n2;
  Eigen::Matrix3d out;
  out.col(0) = b1;
  out.col(1) = b2;
  out.col(2) = b1.cross(b2);
  return out;
}

Eigen::Matrix<double, 6, 1> matrix_to_rot6d(const Eigen::Matrix3d& r) {
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = r.col(0);
  out.tail<3>() = r.col(1);
  return out;
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-12) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

}  // namespace ego3d
