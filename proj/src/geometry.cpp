#include "surgsynth/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "surgsynth/error.hpp"

namespace surgsynth {

std::array<double, 12> Pose::to_array() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = rotation(r, c);
  for (int i = 0; i < 3; ++i) out[9 + i] = translation[i];
  return out;
}

Pose Pose::FromArray(const std::array<double, 12> &values) {
  Pose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = values[r * 3 + c];
  for (int i = 0; i < 3; ++i) p.translation[i] = values[9 + i];
  return p;
}

Mat3 CameraModel::K() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw Error(Errc::kInvalidParam, "focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw Error(Errc::kInvalidParam, "resolution must be positive");
  if (!(near_clip > 0.0))
    throw Error(Errc::kInvalidParam, "near_clip must be positive");
}

Mat3 Rx(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 Ry(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 Rz(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 skew(const Vec3 &v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 nearest_rotation(const Mat3 &m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

double orthonormality_error(const Mat3 &r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

bool is_rotation(const Mat3 &r, double tol) {
  return r.allFinite() && orthonormality_error(r) <= tol;
}

Pose compose(const Pose &a, const Pose &b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if (orthonormality_error(out.rotation) > 1e-9)
    out.rotation = nearest_rotation(out.rotation);
  return out;
}

Pose invert(const Pose &p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec2 project(const CameraModel &cam, const Vec3 &point_cam) {
  if (!(point_cam.z() >= cam.near_clip))
    throw Error(Errc::kBehindCamera,
                "point depth " + std::to_string(point_cam.z()) +
                    " is in front of the near clip plane");
  return {cam.fx * point_cam.x() / point_cam.z() + cam.cx,
          cam.fy * point_cam.y() / point_cam.z() + cam.cy};
}

AxisAngle axis_angle(const Mat3 &r) {
  const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  AxisAngle out;
  out.angle = std::acos(cos_angle);
  if (out.angle == 0.0) return out;

  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (out.angle < kPi / 2.0) {
    out.axis = vee.normalized();
    return out;
  }
  // Near pi the skew part vanishes; recover the axis from the symmetric part
  // (1 - cos) a a^T and take the sign from the skew part.
  const Mat3 sym = 0.5 * (r + r.transpose()) - cos_angle * Mat3::Identity();
  int k = 0;
  sym.diagonal().maxCoeff(&k);
  Vec3 axis = sym.col(k).normalized();
  if (axis.dot(vee) < 0.0) axis = -axis;
  out.axis = axis;
  return out;
}

Mat3 rotation_from(const Vec3 &axis, double angle) {
  return exp_so3(axis.normalized() * angle);
}

Mat3 exp_so3(const Vec3 &omega) {
  const double theta = omega.norm();
  const Mat3 k = skew(omega);
  if (theta < 1e-8) return Mat3::Identity() + k + 0.5 * k * k;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3 &r) {
  const AxisAngle aa = axis_angle(r);
  return aa.axis * aa.angle;
}

Pose interpolate_pose(const Pose &a, const Pose &b, double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw Error(Errc::kOutOfRange, "interpolation parameter outside [0, 1]");
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  Pose out;
  out.translation = (1.0 - s) * a.translation + s * b.translation;
  const Vec3 delta = log_so3(a.rotation.transpose() * b.rotation);
  out.rotation = a.rotation * exp_so3(s * delta);
  if (orthonormality_error(out.rotation) > 1e-9)
    out.rotation = nearest_rotation(out.rotation);
  return out;
}

}  // namespace surgsynth
