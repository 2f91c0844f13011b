#pragma once
// Rigid transforms on SE(3), the pinhole camera, and the Lie-algebra helpers
// the registration solver needs for its pose prior.

#include <Eigen/Core>

namespace vp3d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

// Rigid transform x -> rotation * x + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  // Intrinsic X-Y-Z rotation in degrees (R = Rx * Ry * Rz).
  static Pose from_euler_deg(double rx, double ry, double rz, const Vec3& t = Vec3::Zero());

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Pose operator*(const Pose& o) const { return {rotation * o.rotation, rotation * o.translation + translation}; }
  Pose inverse() const;

  // Orthonormal with det +1, within tol.
  bool is_valid(double tol = 1e-9) const;
};

Mat3 hat(const Vec3& v);

Mat3 so3_exp(const Vec3& phi);
Vec3 so3_log(const Mat3& r);
// Left Jacobian of SO(3).
Mat3 so3_left_jacobian(const Vec3& phi);

// Tangent vectors are ordered (rho, phi): translation part first.
Pose se3_exp(const Vec6& xi);
Vec6 se3_log(const Pose& pose);
Mat6 se3_left_jacobian(const Vec6& xi);
Mat6 se3_left_jacobian_inverse(const Vec6& xi);
// Adjoint, so that pose * exp(xi) * pose^-1 = exp(adjoint(pose) * xi).
Mat6 se3_adjoint(const Pose& pose);

// ||log(a^-1 b)^v||^2
double se3_log_norm(const Pose& a, const Pose& b);

struct CameraModel {
  Mat34 intrinsics = Mat34::Zero();
  int width = 512;
  int height = 512;
  double pixel_size = 0.30;  // mm per pixel at the isocenter

  // K = [f 0 cx 0; 0 f cy 0; 0 0 1 0]
  static CameraModel pinhole(double focal_px, double cx, double cy, int width, int height, double pixel_size);

  // Throws std::invalid_argument if the image size is non-positive or K is rank deficient.
  void validate() const;
  double focal() const { return intrinsics(0, 0); }
  bool contains(const Vec2& px) const;
};

// Camera-frame depth of a camera-frame point (third row of K applied).
double depth(const Vec3& camera_point, const CameraModel& cam);

// Projects a point already expressed in the camera frame. Throws
// BehindCameraError for non-positive depth.
Vec2 project_camera(const Vec3& camera_point, const CameraModel& cam);

// Derivative of project_camera w.r.t. the camera-frame point.
Mat23 projection_jacobian(const Vec3& camera_point, const CameraModel& cam);

// project(point, pose, cam) = project_camera(pose * point, cam)
Vec2 project(const Vec3& point, const Pose& pose, const CameraModel& cam);

}  // namespace vp3d
