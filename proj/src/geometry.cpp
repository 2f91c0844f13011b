#include "vp3d/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vp3d/errors.hpp"

namespace vp3d {
namespace {

constexpr double kSmallAngle = 1e-6;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

Pose Pose::from_euler_deg(double rx, double ry, double rz, const Vec3& t) {
  const Mat3 r = (Eigen::AngleAxisd(deg2rad(rx), Vec3::UnitX()) * Eigen::AngleAxisd(deg2rad(ry), Vec3::UnitY()) *
                  Eigen::AngleAxisd(deg2rad(rz), Vec3::UnitZ()))
                     .toRotationMatrix();
  return {r, t};
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = hat(phi);
  if (theta < kSmallAngle) return Mat3::Identity() + k + 0.5 * k * k;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 so3_log(const Mat3& r) {
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < kSmallAngle) return 0.5 * (1.0 + theta * theta / 6.0) * v;
  if (std::numbers::pi - theta < 1e-4) {
    // Near pi the antisymmetric part vanishes; recover the axis from R + I.
    const Mat3 b = 0.5 * (r + Mat3::Identity());
    int k = 0;
    b.diagonal().maxCoeff(&k);
    Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
    axis.normalize();
    if (axis.dot(v) < 0) axis = -axis;
    return theta * axis;
  }
  return theta / (2.0 * std::sin(theta)) * v;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = hat(phi);
  if (theta < kSmallAngle) return Mat3::Identity() + 0.5 * k + k * k / 6.0;
  const double t2 = theta * theta;
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * k + (theta - std::sin(theta)) / (t2 * theta) * k * k;
}

Pose se3_exp(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  return {so3_exp(phi), so3_left_jacobian(phi) * rho};
}

Vec6 se3_log(const Pose& pose) {
  const Vec3 phi = so3_log(pose.rotation);
  Vec6 xi;
  xi.head<3>() = so3_left_jacobian(phi).inverse() * pose.translation;
  xi.tail<3>() = phi;
  return xi;
}

Mat6 se3_left_jacobian(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const double theta = phi.norm();
  const Mat3 p = hat(phi);
  const Mat3 r = hat(rho);
  double c1, c2, c3;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    const double t2 = theta * theta, t4 = t2 * t2;
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t4);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t4 * theta);
  }
  const Mat3 q = 0.5 * r + c1 * (p * r + r * p + p * r * p) + c2 * (p * p * r + r * p * p - 3.0 * p * r * p) +
                 c3 * (p * r * p * p + p * p * r * p);
  const Mat3 jl = so3_left_jacobian(phi);
  Mat6 j = Mat6::Zero();
  j.topLeftCorner<3, 3>() = jl;
  j.topRightCorner<3, 3>() = q;
  j.bottomRightCorner<3, 3>() = jl;
  return j;
}

Mat6 se3_left_jacobian_inverse(const Vec6& xi) { return se3_left_jacobian(xi).inverse(); }

Mat6 se3_adjoint(const Pose& pose) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = pose.rotation;
  ad.topRightCorner<3, 3>() = hat(pose.translation) * pose.rotation;
  ad.bottomRightCorner<3, 3>() = pose.rotation;
  return ad;
}

double se3_log_norm(const Pose& a, const Pose& b) { return se3_log(a.inverse() * b).squaredNorm(); }

CameraModel CameraModel::pinhole(double focal_px, double cx, double cy, int width, int height, double pixel_size) {
  CameraModel cam;
  cam.intrinsics << focal_px, 0, cx, 0, 0, focal_px, cy, 0, 0, 0, 1, 0;
  cam.width = width;
  cam.height = height;
  cam.pixel_size = pixel_size;
  cam.validate();
  return cam;
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
  if (!(pixel_size > 0.0)) throw std::invalid_argument("camera pixel size must be positive");
  Eigen::FullPivLU<Mat34> lu(intrinsics);
  if (lu.rank() < 3) throw std::invalid_argument("camera intrinsics must have full row rank");
}

bool CameraModel::contains(const Vec2& px) const {
  return px.x() >= -0.5 && px.y() >= -0.5 && px.x() < width - 0.5 && px.y() < height - 0.5;
}

double depth(const Vec3& x, const CameraModel& cam) {
  return cam.intrinsics.row(2).head<3>().dot(x) + cam.intrinsics(2, 3);
}

Vec2 project_camera(const Vec3& x, const CameraModel& cam) {
  const Eigen::Vector3d h = cam.intrinsics.leftCols<3>() * x + cam.intrinsics.col(3);
  if (!(h.z() > 0.0)) throw BehindCameraError("point has non-positive depth");
  return {h.x() / h.z(), h.y() / h.z()};
}

Mat23 projection_jacobian(const Vec3& x, const CameraModel& cam) {
  const Mat3 k = cam.intrinsics.leftCols<3>();
  const Eigen::Vector3d h = k * x + cam.intrinsics.col(3);
  const double inv = 1.0 / h.z();
  Mat23 j;
  j.row(0) = (k.row(0) - h.x() * inv * k.row(2)) * inv;
  j.row(1) = (k.row(1) - h.y() * inv * k.row(2)) * inv;
  return j;
}

Vec2 project(const Vec3& point, const Pose& pose, const CameraModel& cam) { return project_camera(pose * point, cam); }

}  // namespace vp3d
