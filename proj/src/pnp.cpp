#include "surgsynth/pnp.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "surgsynth/error.hpp"

namespace surgsynth {
namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

void check_input(std::span<const Correspondence> corrs, const PnpOptions &options) {
  if (corrs.size() < 6)
    throw Error(Errc::kDegenerateConfiguration, "PnP needs at least 6 correspondences, got " +
                                                    std::to_string(corrs.size()));
  Vec3 mean = Vec3::Zero();
  for (const auto &c : corrs) mean += c.model_point;
  mean /= static_cast<double>(corrs.size());
  Eigen::MatrixXd centered(corrs.size(), 3);
  for (std::size_t i = 0; i < corrs.size(); ++i) centered.row(i) = (corrs[i].model_point - mean).transpose();
  const Vec3 sv = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  if (!(sv[0] > 0.0) || sv[2] / sv[0] < options.degeneracy_ratio)
    throw Error(Errc::kDegenerateConfiguration, "model points are coplanar or collinear");
}

// Sum of squared residuals; infinity when a point is not strictly in front.
double cost(const Pose &pose, std::span<const Correspondence> corrs, const CameraModel &cam) {
  double sum = 0.0;
  for (const auto &c : corrs) {
    const Vec3 p = pose * c.model_point;
    if (!(p.z() > 1e-9)) return std::numeric_limits<double>::infinity();
    const double du = cam.fx * p.x() / p.z() + cam.cx - c.image_point.x();
    const double dv = cam.fy * p.y() / p.z() + cam.cy - c.image_point.y();
    sum += du * du + dv * dv;
  }
  return sum;
}

double to_rmse(double cost_value, std::size_t n) { return std::sqrt(cost_value / static_cast<double>(n)); }

}  // namespace

Eigen::VectorXd reprojection_residuals(const Pose &pose, std::span<const Correspondence> corrs,
                                       const CameraModel &cam) {
  Eigen::VectorXd r(2 * corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 p = pose * corrs[i].model_point;
    r[2 * i] = cam.fx * p.x() / p.z() + cam.cx - corrs[i].image_point.x();
    r[2 * i + 1] = cam.fy * p.y() / p.z() + cam.cy - corrs[i].image_point.y();
  }
  return r;
}

double reprojection_rmse(const Pose &pose, std::span<const Correspondence> corrs, const CameraModel &cam) {
  if (corrs.empty()) throw Error(Errc::kEmptyInput, "no correspondences");
  double sum = 0.0;
  for (const auto &c : corrs) {
    const Vec2 uv = project(cam, pose * c.model_point);
    sum += (uv - c.image_point).squaredNorm();
  }
  return to_rmse(sum, corrs.size());
}

Pose apply_increment(const Pose &pose, const Vec6 &delta) {
  return {exp_so3(delta.head<3>()) * pose.rotation, pose.translation + delta.tail<3>()};
}

Eigen::MatrixXd reprojection_jacobian(const Pose &pose, std::span<const Correspondence> corrs,
                                      const CameraModel &cam) {
  Eigen::MatrixXd jac(2 * corrs.size(), 6);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 rx = pose.rotation * corrs[i].model_point;
    const Vec3 p = rx + pose.translation;
    const double iz = 1.0 / p.z();
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << cam.fx * iz, 0.0, -cam.fx * p.x() * iz * iz,
             0.0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
    // d(exp(w) R x)/dw at w = 0 is -[R x]_x.
    jac.block<2, 3>(2 * i, 0) = -dproj * skew(rx);
    jac.block<2, 3>(2 * i, 3) = dproj;
  }
  return jac;
}

Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraModel &cam, const PnpOptions &options) {
  check_input(corrs, options);
  const std::size_t n = corrs.size();

  // Normalized image coordinates (K removed), then Hartley similarity
  // normalization of both point sets.
  std::vector<Vec2> xs(n);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = {(corrs[i].image_point.x() - cam.cx) / cam.fx, (corrs[i].image_point.y() - cam.cy) / cam.fy};
  Vec2 c2 = Vec2::Zero();
  Vec3 c3 = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    c2 += xs[i];
    c3 += corrs[i].model_point;
  }
  c2 /= static_cast<double>(n);
  c3 /= static_cast<double>(n);
  double d2 = 0.0, d3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d2 += (xs[i] - c2).norm();
    d3 += (corrs[i].model_point - c3).norm();
  }
  const double s2 = d2 > 0.0 ? std::sqrt(2.0) * static_cast<double>(n) / d2 : 1.0;
  const double s3 = std::sqrt(3.0) * static_cast<double>(n) / d3;

  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 x = s2 * (xs[i] - c2);
    const Vec3 m = s3 * (corrs[i].model_point - c3);
    Eigen::Matrix<double, 1, 4> xh;
    xh << m.x(), m.y(), m.z(), 1.0;
    a.row(2 * i) << xh, Eigen::Matrix<double, 1, 4>::Zero(), -x.x() * xh;
    a.row(2 * i + 1) << Eigen::Matrix<double, 1, 4>::Zero(), xh, -x.y() * xh;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pn;
  pn << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();

  Eigen::Matrix3d t2inv = Eigen::Matrix3d::Identity();
  t2inv(0, 0) = t2inv(1, 1) = 1.0 / s2;
  t2inv(0, 2) = c2.x();
  t2inv(1, 2) = c2.y();
  Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity();
  t3.topLeftCorner<3, 3>() *= s3;
  t3.topRightCorner<3, 1>() = -s3 * c3;
  Eigen::Matrix<double, 3, 4> p = t2inv * pn * t3;

  Mat3 m = p.leftCols<3>();
  if (m.determinant() < 0.0) {
    p = -p;
    m = -m;
  }
  const Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0)) throw Error(Errc::kDegenerateConfiguration, "DLT produced a rank-deficient camera matrix");
  Pose pose;
  pose.rotation = nearest_rotation(m);
  pose.translation = p.col(3) / scale;
  return pose;
}

namespace {

// Homography start for (nearly) planar model points: points are expressed in
// their principal plane, the plane-to-image homography is estimated linearly
// and decomposed into a rotation and translation.
Pose planar_start(std::span<const Correspondence> corrs, const CameraModel &cam) {
  const std::size_t n = corrs.size();
  Vec3 c = Vec3::Zero();
  for (const auto &k : corrs) c += k.model_point;
  c /= static_cast<double>(n);
  Eigen::MatrixXd centered(n, 3);
  for (std::size_t i = 0; i < n; ++i) centered.row(i) = (corrs[i].model_point - c).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> pca(centered, Eigen::ComputeThinV);
  Mat3 basis = pca.matrixV();
  if (basis.determinant() < 0.0) basis.col(2) = -basis.col(2);

  std::vector<Vec2> a(n), m(n);
  Vec2 ca = Vec2::Zero(), cm = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 local = basis.transpose() * (corrs[i].model_point - c);
    a[i] = local.head<2>();
    m[i] = {(corrs[i].image_point.x() - cam.cx) / cam.fx, (corrs[i].image_point.y() - cam.cy) / cam.fy};
    ca += a[i];
    cm += m[i];
  }
  ca /= static_cast<double>(n);
  cm /= static_cast<double>(n);
  double da = 0.0, dm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    da += (a[i] - ca).norm();
    dm += (m[i] - cm).norm();
  }
  const double sa = std::sqrt(2.0) * static_cast<double>(n) / da;
  const double sm = dm > 0.0 ? std::sqrt(2.0) * static_cast<double>(n) / dm : 1.0;

  Eigen::MatrixXd sys(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 x = sa * (a[i] - ca);
    const Vec2 y = sm * (m[i] - cm);
    Eigen::Matrix<double, 1, 3> xh(x.x(), x.y(), 1.0);
    sys.row(2 * i) << xh, Eigen::Matrix<double, 1, 3>::Zero(), -y.x() * xh;
    sys.row(2 * i + 1) << Eigen::Matrix<double, 1, 3>::Zero(), xh, -y.y() * xh;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h.segment<3>(0).transpose(), h.segment<3>(3).transpose(), h.segment<3>(6).transpose();
  Mat3 tm_inv = Mat3::Identity(), ta = Mat3::Identity();
  tm_inv(0, 0) = tm_inv(1, 1) = 1.0 / sm;
  tm_inv(0, 2) = cm.x();
  tm_inv(1, 2) = cm.y();
  ta(0, 0) = ta(1, 1) = sa;
  ta(0, 2) = -sa * ca.x();
  ta(1, 2) = -sa * ca.y();
  Mat3 hom = tm_inv * hn * ta;

  double lambda = 0.5 * (hom.col(0).norm() + hom.col(1).norm());
  if (hom(2, 2) < 0.0) lambda = -lambda;  // plane origin in front of the camera
  const Vec3 r1 = hom.col(0) / lambda, r2 = hom.col(1) / lambda;
  Mat3 rp;
  rp << r1, r2, r1.cross(r2);
  Pose pose;
  pose.rotation = nearest_rotation(rp) * basis.transpose();
  pose.translation = hom.col(2) / lambda - pose.rotation * c;
  return pose;
}

// The other member of the planar two-fold ambiguity: the plane normal is
// mirrored about the ray through the points' centroid, which keeps the
// centroid in place and nearly preserves the image.
Pose mirrored_start(const Pose &pose, std::span<const Correspondence> corrs) {
  Vec3 c = Vec3::Zero();
  for (const auto &k : corrs) c += k.model_point;
  c /= static_cast<double>(corrs.size());
  Eigen::MatrixXd centered(corrs.size(), 3);
  for (std::size_t i = 0; i < corrs.size(); ++i) centered.row(i) = (corrs[i].model_point - c).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> pca(centered, Eigen::ComputeThinV);
  const Vec3 center = pose * c;
  const Vec3 d = center.normalized();
  const Vec3 n = pose.rotation * pca.matrixV().col(2);
  const Vec3 mirrored = 2.0 * n.dot(d) * d - n;
  Pose out;
  out.rotation = Eigen::Quaterniond::FromTwoVectors(n, mirrored).toRotationMatrix() * pose.rotation;
  out.translation = center - out.rotation * c;
  return out;
}

bool near_planar(std::span<const Correspondence> corrs) {
  Vec3 mean = Vec3::Zero();
  for (const auto &c : corrs) mean += c.model_point;
  mean /= static_cast<double>(corrs.size());
  Eigen::MatrixXd centered(corrs.size(), 3);
  for (std::size_t i = 0; i < corrs.size(); ++i) centered.row(i) = (corrs[i].model_point - mean).transpose();
  const Vec3 sv = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  return sv[2] < 0.1 * sv[1];
}

}  // namespace

namespace {

PnpResult refine(const Pose &start, std::span<const Correspondence> corrs, const CameraModel &cam,
                 const PnpOptions &options) {
  PnpResult res;
  res.pose = start;
  double f = cost(res.pose, corrs, cam);
  res.initial_rmse = to_rmse(f, corrs.size());
  res.rmse = res.initial_rmse;
  res.rmse_history.push_back(res.rmse);
  if (res.rmse < 1e-9) return res;

  double lambda = options.lambda_init;
  bool converged = false;
  while (res.iterations < options.max_iterations) {
    ++res.iterations;
    // Residuals are only defined with every point in front of the camera.
    const Eigen::MatrixXd jac = reprojection_jacobian(res.pose, corrs, cam);
    const Eigen::VectorXd r =
        std::isfinite(f) ? reprojection_residuals(res.pose, corrs, cam) : Eigen::VectorXd::Zero(jac.rows());
    const Eigen::Matrix<double, 6, 6> hess = jac.transpose() * jac;
    const Vec6 grad = jac.transpose() * r;
    Eigen::Matrix<double, 6, 6> damped = hess;
    for (int k = 0; k < 6; ++k) damped(k, k) += lambda * std::max(hess(k, k), 1e-12);
    const Pose cand = apply_increment(res.pose, damped.ldlt().solve(-grad));
    const double fc = cost(cand, corrs, cam);
    if (fc < f) {
      const double improvement = res.rmse - to_rmse(fc, corrs.size());
      res.pose = cand;
      f = fc;
      res.rmse = to_rmse(f, corrs.size());
      res.rmse_history.push_back(res.rmse);
      ++res.accepted_steps;
      lambda /= 10.0;
      if (improvement < options.min_improvement) {
        converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      // No damping makes progress: the current pose is a local minimum.
      if (lambda > 1e10) {
        converged = true;
        break;
      }
    }
  }
  if (!converged && res.accepted_steps == 0)
    throw Error(Errc::kDiverged, "refinement reached " + std::to_string(options.max_iterations) +
                                     " iterations without reducing the reprojection error");
  if (!std::isfinite(f)) throw Error(Errc::kDiverged, "refined pose places points behind the camera");

  std::size_t in_front = 0;
  for (const auto &c : corrs)
    if ((res.pose * c.model_point).z() > 0.0) ++in_front;
  if (10 * in_front < 9 * corrs.size())
    throw Error(Errc::kDiverged, "only " + std::to_string(in_front) + " of " + std::to_string(corrs.size()) +
                                     " points in front of the camera");
  return res;
}

}  // namespace

PnpResult solve_pnp(std::span<const Correspondence> corrs, const CameraModel &cam, const PnpOptions &options) {
  const Pose dlt = pnp_dlt(corrs, cam, options);
  std::vector<Pose> starts{dlt};
  // The linear estimate is poorly conditioned when the points are nearly
  // planar (the needle is a thin arc), so a homography start competes.
  // The homography starts also stand in when the DLT pose puts points behind
  // the camera, which happens for thin point sets just above the cutoff.
  if (near_planar(corrs) || !std::isfinite(cost(dlt, corrs, cam))) {
    starts.push_back(planar_start(corrs, cam));
    starts.push_back(mirrored_start(starts.back(), corrs));
  }

  std::optional<PnpResult> best;
  std::optional<Error> failure;
  for (const Pose &s : starts) {
    try {
      PnpResult r = refine(s, corrs, cam, options);
      if (!best || r.rmse < best->rmse) best = std::move(r);
    } catch (const Error &e) {
      if (!failure) failure = e;
    }
  }
  if (!best) throw *failure;
  best->dlt_rmse = to_rmse(cost(dlt, corrs, cam), corrs.size());
  return *best;
}

std::vector<Correspondence> parse_correspondences_csv(const std::string &text) {
  std::vector<Correspondence> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string field;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception &) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (lineno == 1 && out.empty()) continue;  // header
      throw Error(Errc::kParseError, "line " + std::to_string(lineno) + ": non-numeric field");
    }
    if (v.size() != 5)
      throw Error(Errc::kParseError,
                  "line " + std::to_string(lineno) + ": expected 5 values x,y,z,u,v, got " + std::to_string(v.size()));
    out.push_back({{v[0], v[1], v[2]}, {v[3], v[4]}});
  }
  return out;
}

std::vector<Correspondence> read_correspondences_csv(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_correspondences_csv(ss.str());
}

}  // namespace surgsynth
