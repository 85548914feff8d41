#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bikepose/bike_model.hpp"
#include "bikepose/losses.hpp"
#include "bikepose/synth_data.hpp"

namespace bikepose {

/// 2D keypoints observed on the full image, with the detection box that
/// defines the crop.
struct Observation {
  std::array<std::optional<Vec2>, kNumKeypoints> keypoints;
  BBox2D bbox;
  Camera camera;
  std::optional<double> noise_sigma_hint;

  bool visible(std::size_t i) const { return keypoints[i].has_value(); }
  int visible_count() const;
  std::array<bool, kNumKeypoints> visibility() const;

  /// Visible ground-truth keypoints of a record.
  static Observation from_record(const AnnotationRecord& rec);
};

struct SolverConfig {
  int yaw_starts = 8;
  /// Crank-angle seeds tried from each converged yaw start.
  int pedal_starts = 4;
  int max_iterations = 200;
  double fd_step = 1e-4;
  double lm_lambda_init = 1e-3;
  double lm_lambda_factor = 10.0;
  double converge_tol = 1e-10;
  bool fit_shape = false;
  double shape_ridge = 10.0;
  ParamDomain domain = ParamDomain::standard();
  LossWeights weights;
  double residual_bound = kDefaultResidualBound;
  double out_size = kCropSize;

  void validate() const;
};

struct SolveResult {
  Pose8D pose;
  ResidualSet residuals;
  double objective = 0.0;
  std::vector<double> per_start_objectives;
  int best_start = 0;
  int iterations_used = 0;
  bool converged = false;
};

inline constexpr double kBehindCameraPenalty = 1e6;
inline constexpr int kMinVisibleKeypoints = 6;

/// Free parameters: the 8 pose parameters, then 3 per non-root keypoint
/// residual when fitting shape.
inline constexpr std::size_t kNumShapeParams = 3 * (kNumKeypoints - 1);

/// Stacked weighted residuals whose squared norm is the objective: normalized
/// crop-pixel differences on visible keypoints, then (with `with_shape`) the
/// ridge prior entries. nullopt when a keypoint falls behind the camera.
std::optional<Eigen::VectorXd> residual_vector(const Observation& obs,
                                               const CanonicalTemplate& tmpl, const Pose8D& pose,
                                               const ResidualSet& residuals,
                                               const SolverConfig& cfg, bool with_shape);

/// beta5 * L_2DK(projection vs observation) + beta4 * shape_ridge * L_3D(residuals vs 0).
/// Returns kBehindCameraPenalty instead of a non-finite value.
double objective(const Observation& obs, const CanonicalTemplate& tmpl, const Pose8D& pose,
                 const ResidualSet& residuals, const SolverConfig& cfg);

struct JacobianResult {
  Eigen::MatrixXd jacobian;
  /// Per column: a one-sided difference was used at a domain boundary.
  std::vector<bool> one_sided;
  bool any_one_sided() const;
};

/// Central differences with step cfg.fd_step per parameter; columns follow
/// PoseParam order, then shape parameters when cfg.fit_shape.
JacobianResult numeric_jacobian(const Observation& obs, const CanonicalTemplate& tmpl,
                                const Pose8D& pose, const ResidualSet& residuals,
                                const SolverConfig& cfg);

/// Gradient of the objective over the 8 pose parameters, 2 J^T r.
Eigen::VectorXd objective_gradient(const Observation& obs, const CanonicalTemplate& tmpl,
                                   const Pose8D& pose, const ResidualSet& residuals,
                                   const SolverConfig& cfg);

/// Initial pose for one yaw seed: body angles and articulation at zero, depth
/// from the box height, x from the box centre and y from the box bottom.
Pose8D initial_pose(const Observation& obs, const CanonicalTemplate& tmpl,
                    const SolverConfig& cfg, double yaw);

/// Multi-start damped least squares. Throws UnderConstrainedError with fewer
/// than 6 visible keypoints.
SolveResult fit_pose(const Observation& obs, const CanonicalTemplate& tmpl,
                     const SolverConfig& cfg);

}  // namespace bikepose
