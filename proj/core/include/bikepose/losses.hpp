#pragma once

#include <array>
#include <optional>

#include "bikepose/bike_model.hpp"
#include "bikepose/synth_data.hpp"

namespace bikepose {

/// Weights of the seven-term objective, in the order
/// rotation, translation, pedal/steering, 3D residual, 2D keypoint,
/// 2D consistency, auxiliary box centre.
struct LossWeights {
  double beta1 = 1.0;
  double beta2 = 1.0;
  double beta3 = 2.0;
  double beta4 = 0.5;
  double beta5 = 1.0;
  double beta6 = 1.0;
  double beta7 = 0.2;

  void validate() const;
};

/// Per-term losses; the two keypoint terms are absent when no keypoint is
/// visible and are then left out of the total.
struct LossBreakdown {
  double l_r = 0.0;
  double l_t = 0.0;
  double l_ps = 0.0;
  double l_3d = 0.0;
  std::optional<double> l_2dk;
  std::optional<double> l_2dcon;
  double l_aux = 0.0;
  double total = 0.0;
};

double weighted_total(const LossBreakdown& b, const LossWeights& w);

/// Non-periodic: 2 (v - min) / (max - min) - 1 clamped to [-1, 1].
/// Periodic: wrapped signed difference (v - reference) over half the width.
double normalize_param(double value, const Interval& range, double reference = 0.0);

/// Pixel on the crop mapped to [-1, 1] around the crop centre.
Vec2 normalize_crop_pixel(const Vec2& uv, double out_size = kCropSize);

/// One side (prediction or ground truth) of a loss evaluation.
struct LossSample {
  Pose8D pose;
  ResidualSet residuals;
  KeypointSet2D kp2d_ib;
  /// 2D box centre on the full image.
  Vec2 box_center = Vec2::Zero();
};

struct LossContext {
  Camera camera;
  CropTransform crop;
  CanonicalTemplate mean_template = CanonicalTemplate::default_template();
  ParamDomain domain = ParamDomain::standard();
  std::array<bool, kNumKeypoints> visibility = all_visible();
  double residual_bound = kDefaultResidualBound;
  double out_size = kCropSize;

  static constexpr std::array<bool, kNumKeypoints> all_visible() {
    std::array<bool, kNumKeypoints> v{};
    for (auto& b : v) b = true;
    return v;
  }
};

/// Squared normalized difference of one pose parameter (wrapped when the
/// range is periodic).
double param_sq_error(PoseParam p, double pred, double gt, const ParamDomain& domain);

/// Mean over the visible keypoints' normalized coordinates of the squared
/// difference; nullopt when nothing is visible.
std::optional<double> keypoint2d_loss(const KeypointSet2D& pred, const KeypointSet2D& gt,
                                      const std::array<bool, kNumKeypoints>& visibility,
                                      double out_size = kCropSize);

/// Mean squared residual difference, normalized by the residual bound.
double residual_loss(const ResidualSet& pred, const ResidualSet& gt, double bound);

/// Squared normalized distance between box centres on the full image,
/// averaged over the two coordinates.
double box_center_loss(const Vec2& pred, const Vec2& gt, const Camera& camera);

LossBreakdown loss_terms(const LossSample& pred, const LossSample& gt, const LossContext& ctx,
                         const LossWeights& weights = {});

}  // namespace bikepose
