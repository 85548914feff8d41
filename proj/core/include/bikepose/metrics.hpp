#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bikepose/bike_model.hpp"
#include "bikepose/error.hpp"
#include "bikepose/records.hpp"

namespace bikepose {

struct PoseErrors {
  double rot_err = 0.0;    ///< geodesic, degrees
  double trans_err = 0.0;  ///< Euclidean, meters
};

/// Geodesic angle of R_pred * R_gt^T and the translation distance.
PoseErrors pose_errors(const Rotation3& r_pred, const Vec3& t_pred, const Rotation3& r_gt,
                       const Vec3& t_gt);
/// 6D errors of two poses; articulation is ignored.
PoseErrors pose_errors(const Pose8D& pred, const Pose8D& gt);

/// Mean absolute error per pose parameter in PoseParam order. Angles use the
/// smaller arc. Throws InvalidArgumentError on empty or misaligned input.
std::array<double, kNumPoseParams> mae_per_parameter(std::span<const Pose8D> preds,
                                                     std::span<const Pose8D> gts);

// --- 3D box IoU ------------------------------------------------------------

/// Closed convex polytope as outward-oriented polygonal faces.
struct Polytope {
  std::vector<std::vector<Vec3>> faces;
  double volume() const;
};

Polytope box_polytope(const OrientedBox3D& box);
/// Keeps the part of `poly` with normal . x <= offset.
Polytope clip_polytope(const Polytope& poly, const Vec3& normal, double offset);

enum class IouMode { kExact, kMonteCarlo };

struct IouOptions {
  IouMode mode = IouMode::kExact;
  std::size_t mc_samples = 200000;
  std::uint64_t seed = 0;
};

double intersection_volume(const OrientedBox3D& a, const OrientedBox3D& b);
double iou3d_exact(const OrientedBox3D& a, const OrientedBox3D& b);
/// Samples n points in each box and averages the two containment estimates
/// of the intersection volume.
double iou3d_monte_carlo(const OrientedBox3D& a, const OrientedBox3D& b, std::size_t n,
                         std::uint64_t seed);
double iou3d(const OrientedBox3D& a, const OrientedBox3D& b, const IouOptions& opts = {});

// --- Average recall --------------------------------------------------------

/// 100 * fraction of samples for which `passes` holds.
template <typename T, typename Pred>
double average_recall(std::span<const T> samples, Pred&& passes) {
  if (samples.empty()) throw InvalidArgumentError("average recall of an empty sample set");
  std::size_t hits = 0;
  for (const T& s : samples) {
    if (passes(s)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct PoseCriterion {
  double max_rot_deg;
  double max_trans_m;
  bool passes(const PoseErrors& e) const {
    return e.rot_err <= max_rot_deg && e.trans_err <= max_trans_m;
  }
};

inline constexpr std::array<double, 3> kIouThresholds = {0.10, 0.25, 0.50};
inline constexpr std::array<PoseCriterion, 4> kPoseCriteria = {
    PoseCriterion{5.0, 0.05}, PoseCriterion{10.0, 0.10}, PoseCriterion{40.0, 0.20},
    PoseCriterion{60.0, 0.30}};
inline constexpr std::array<double, 4> kPixelThresholds = {5.0, 10.0, 20.0, 30.0};

/// Mean distance over model points between the 8D-reposed prediction and
/// ground truth. `model_points` are canonical keypoints.
double add_metric(const Pose8D& pred_pose, const Pose8D& gt_pose,
                  const KeypointSet3D& model_points);

/// Mean Euclidean distance over visible keypoints; throws when none is visible.
double mean_keypoint_distance(const KeypointSet2D& pred, const KeypointSet2D& gt,
                              const std::array<bool, kNumKeypoints>& visibility);

/// 2D AR per threshold. Per sample (default): a sample passes when its mean
/// visible-keypoint distance is within the threshold. Per keypoint: the
/// fraction of all visible keypoints within the threshold.
std::vector<double> keypoint2d_ar(std::span<const KeypointSet2D> preds,
                                  std::span<const KeypointSet2D> gts,
                                  std::span<const std::array<bool, kNumKeypoints>> visibility,
                                  std::span<const double> thresholds, bool per_keypoint = false);

// --- Report ----------------------------------------------------------------

struct ReportOptions {
  IouOptions iou;
  bool per_keypoint_2d = false;
};

struct MetricsReport {
  std::array<double, kNumPoseParams> mae{};
  std::array<double, kIouThresholds.size()> ar_3d{};
  std::array<double, kPoseCriteria.size()> pose_criteria{};
  double add = 0.0;
  std::array<double, kPixelThresholds.size()> ar_2d_i{};
  std::array<double, kPixelThresholds.size()> ar_2d_ib{};
  std::size_t sample_count = 0;
  std::size_t converged_count = 0;
  std::size_t failed_count = 0;

  bool operator==(const MetricsReport& other) const = default;
};

/// Matches predictions to records by sample_id. Throws InvalidArgumentError
/// listing unmatched ids on either side, or on empty input.
MetricsReport build_report(const Dataset& dataset, std::span<const PredictionRecord> predictions,
                           const ReportOptions& opts = {});

/// Fixed-width tables: per-parameter MAE, 3D AR / pose criteria / ADD, 2D AR.
std::string format_report_table(const MetricsReport& report);
/// One JSON object per metric group, newline separated.
std::string format_report_jsonl(const MetricsReport& report);

}  // namespace bikepose
