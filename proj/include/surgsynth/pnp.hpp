#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "surgsynth/geometry.hpp"

namespace surgsynth {

struct Correspondence {
  Vec3 model_point;  // mm, model frame
  Vec2 image_point;  // px
};

struct PnpOptions {
  int max_iterations = 100;
  double lambda_init = 1e-3;
  double min_improvement = 1e-10;  // px of RMSE
  double degeneracy_ratio = 1e-6;  // smallest / largest singular value of the centered model points
};

struct PnpResult {
  Pose pose;  // model to camera
  double rmse = 0.0;
  double initial_rmse = 0.0;  // at the start the result was refined from
  double dlt_rmse = 0.0;      // of the linear DLT estimate (infinite if points fall behind)
  int iterations = 0;
  int accepted_steps = 0;
  std::vector<double> rmse_history;  // initial value, then one entry per accepted step
};

// Linear estimate from the normalized DLT, projected to the nearest rotation.
// Throws DegenerateConfiguration.
Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraModel &cam,
             const PnpOptions &options = {});

// DLT then damped Gauss-Newton on the pixel residuals. Rotation updates are
// left-multiplied axis-angle increments. For nearly planar model points, or
// when the linear estimate puts points behind the camera, both poses of the
// plane-homography ambiguity are refined as well and the lowest RMSE wins.
// Throws DegenerateConfiguration for fewer than 6 points or near-coplanar
// model points, Diverged when no step is accepted within the iteration cap or
// fewer than 90% of the points end in front of the camera.
PnpResult solve_pnp(std::span<const Correspondence> corrs, const CameraModel &cam,
                    const PnpOptions &options = {});

// Throws BehindCamera if any point lands in front of the near clip.
double reprojection_rmse(const Pose &pose, std::span<const Correspondence> corrs, const CameraModel &cam);

// Stacked residuals project(pose * x) - uv, 2 per correspondence.
Eigen::VectorXd reprojection_residuals(const Pose &pose, std::span<const Correspondence> corrs,
                                       const CameraModel &cam);

// Increment delta = (omega, dt): R <- exp(omega) R, t <- t + dt.
Pose apply_increment(const Pose &pose, const Eigen::Matrix<double, 6, 1> &delta);

// d residuals / d delta at delta = 0, shape (2N, 6).
Eigen::MatrixXd reprojection_jacobian(const Pose &pose, std::span<const Correspondence> corrs,
                                      const CameraModel &cam);

// CSV with rows x,y,z,u,v; a non-numeric first line is taken as a header.
// Throws ParseError naming the line.
std::vector<Correspondence> parse_correspondences_csv(const std::string &text);
std::vector<Correspondence> read_correspondences_csv(const std::filesystem::path &path);

}  // namespace surgsynth
