#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bikepose/bike_model.hpp"
#include "bikepose/geometry.hpp"
#include "bikepose/solver.hpp"

// Reference computations that share no code path with the library routines
// they check. Used by the unit/acceptance tests and by `bikepose oracle-check`.
namespace bikepose::oracle {

using Mat4 = Eigen::Matrix4d;

/// Axis rotations written out element by element.
Eigen::Matrix3d axis_x(double deg);
Eigen::Matrix3d axis_y(double deg);
Eigen::Matrix3d axis_z(double deg);

/// Rodrigues' formula for a rotation about a unit axis through `pivot`, as a
/// homogeneous matrix T(pivot) * R * T(-pivot).
Mat4 rotation_about_line(const Eigen::Vector3d& pivot, const Eigen::Vector3d& direction,
                         double deg);
Mat4 translation(const Eigen::Vector3d& t);
Mat4 homogeneous(const Eigen::Matrix3d& r);

/// Forward kinematics by explicit 4x4 matrix products per keypoint group.
KeypointSet3D repose_homogeneous(const KeypointSet3D& kc, const Pose8D& pose);

/// Pose drawn uniformly over the default domain.
Pose8D random_pose(std::mt19937_64& rng);
/// Residuals uniform in a ball of `radius`, root residual zero.
ResidualSet random_residuals(std::mt19937_64& rng, double radius);

/// Random pair of oriented boxes whose centres are close enough to overlap.
std::pair<OrientedBox3D, OrientedBox3D> random_overlapping_boxes(std::mt19937_64& rng);

/// Five-point central difference of the solver objective in each pose
/// parameter.
Eigen::VectorXd finite_difference_gradient(const Observation& obs, const CanonicalTemplate& tmpl,
                                           const Pose8D& pose, const ResidualSet& residuals,
                                           const SolverConfig& cfg, double step = 1e-3);

/// Component-wise relative agreement with a small absolute floor scaled by
/// the gradient magnitude.
bool gradients_agree(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel_tol);

struct SuiteResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  /// Serialized first failing case, empty when all passed.
  std::string first_failure;
  bool ok() const { return passed == total; }
};

struct SuiteOptions {
  std::uint64_t seed = 20240611;
  std::size_t kinematics_draws = 1000;
  double kinematics_tol = 1e-9;
  std::size_t iou_pairs = 100;
  std::size_t iou_mc_samples = 200000;
  double iou_tol = 0.01;
  std::size_t gradient_points = 100;
  double gradient_rel_tol = 1e-4;
};

SuiteResult kinematics_suite(const SuiteOptions& opts);
SuiteResult iou_suite(const SuiteOptions& opts);
SuiteResult gradient_suite(const SuiteOptions& opts);

std::vector<SuiteResult> run_all(const SuiteOptions& opts);

}  // namespace bikepose::oracle
