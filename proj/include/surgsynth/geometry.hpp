#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace surgsynth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid model-to-frame transform. Translation in millimeters.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose Identity() { return {}; }
  static Pose FromTranslation(const Vec3 &t) { return {Mat3::Identity(), t}; }

  Vec3 operator*(const Vec3 &x) const { return rotation * x + translation; }

  // Row-major R (9 values) followed by t (3 values).
  std::array<double, 12> to_array() const;
  static Pose FromArray(const std::array<double, 12> &values);
};

// Pinhole camera, computer-vision convention: x right, y down, z forward.
// Pixel (i, j) has its center at (u, v) = (i, j).
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  double near_clip = 1.0;

  Mat3 K() const;
  // Throws InvalidParam when an invariant is violated.
  void validate() const;
};

struct AxisAngle {
  Vec3 axis = Vec3::UnitZ();
  double angle = 0.0;  // radians in [0, pi]
};

Mat3 Rx(double angle);
Mat3 Ry(double angle);
Mat3 Rz(double angle);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

Pose compose(const Pose &a, const Pose &b);
Pose invert(const Pose &p);

// Throws BehindCamera when point_cam.z < cam.near_clip.
Vec2 project(const CameraModel &cam, const Vec3 &point_cam);

// Geodesic angle arccos(clamp((trace(r) - 1) / 2)) and a unit axis.
AxisAngle axis_angle(const Mat3 &r);
Mat3 rotation_from(const Vec3 &axis, double angle);

// Rotation-vector (axis * angle) exponential and logarithm.
Mat3 exp_so3(const Vec3 &omega);
Vec3 log_so3(const Mat3 &r);
Mat3 skew(const Vec3 &v);

// Closest rotation in Frobenius norm (SVD projection onto SO(3)).
Mat3 nearest_rotation(const Mat3 &m);
// max |R^T R - I| elementwise together with |det(R) - 1|.
double orthonormality_error(const Mat3 &r);
bool is_rotation(const Mat3 &r, double tol);

// Translation linear, rotation along the shortest geodesic at constant speed.
// Throws OutOfRange when s is outside [0, 1].
Pose interpolate_pose(const Pose &a, const Pose &b, double s);

}  // namespace surgsynth
