#include "bikepose/losses.hpp"

#include <algorithm>
#include <cmath>

#include "bikepose/error.hpp"

namespace bikepose {
namespace {

double wrap_signed(double d, double width) {
  double w = d - width * std::floor(d / width + 0.5);
  if (w >= 0.5 * width) w -= width;
  return w;
}

}  // namespace

void LossWeights::validate() const {
  for (double b : {beta1, beta2, beta3, beta4, beta5, beta6, beta7}) {
    if (!(b >= 0.0)) throw InvalidArgumentError("loss weights must be non-negative");
  }
}

double weighted_total(const LossBreakdown& b, const LossWeights& w) {
  double total = w.beta1 * b.l_r + w.beta2 * b.l_t + w.beta3 * b.l_ps + w.beta4 * b.l_3d +
                 w.beta7 * b.l_aux;
  if (b.l_2dk) total += w.beta5 * *b.l_2dk;
  if (b.l_2dcon) total += w.beta6 * *b.l_2dcon;
  return total;
}

double normalize_param(double value, const Interval& range, double reference) {
  if (range.periodic) return wrap_signed(value - reference, range.width()) / (0.5 * range.width());
  return std::clamp(2.0 * (value - range.min) / range.width() - 1.0, -1.0, 1.0);
}

Vec2 normalize_crop_pixel(const Vec2& uv, double out_size) {
  const double half = 0.5 * out_size;
  return (uv - Vec2(half, half)) / half;
}

double param_sq_error(PoseParam p, double pred, double gt, const ParamDomain& domain) {
  const Interval& r = domain[p];
  const double d = r.periodic ? normalize_param(pred, r, gt)
                              : normalize_param(pred, r) - normalize_param(gt, r);
  return d * d;
}

std::optional<double> keypoint2d_loss(const KeypointSet2D& pred, const KeypointSet2D& gt,
                                      const std::array<bool, kNumKeypoints>& visibility,
                                      double out_size) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (!visibility[i]) continue;
    sum += (normalize_crop_pixel(pred[i], out_size) - normalize_crop_pixel(gt[i], out_size))
               .squaredNorm();
    count += 2;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

double residual_loss(const ResidualSet& pred, const ResidualSet& gt, double bound) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) sum += ((pred[i] - gt[i]) / bound).squaredNorm();
  return sum / (3.0 * kNumKeypoints);
}

double box_center_loss(const Vec2& pred, const Vec2& gt, const Camera& camera) {
  const Vec2 half(0.5 * camera.width, 0.5 * camera.height);
  return ((pred - gt).cwiseQuotient(half)).squaredNorm() / 2.0;
}

LossBreakdown loss_terms(const LossSample& pred, const LossSample& gt, const LossContext& ctx,
                         const LossWeights& weights) {
  const auto& dom = ctx.domain;
  LossBreakdown b;
  b.l_r = (param_sq_error(PoseParam::kThetaX, pred.pose.theta_x, gt.pose.theta_x, dom) +
           param_sq_error(PoseParam::kThetaY, pred.pose.theta_y, gt.pose.theta_y, dom) +
           param_sq_error(PoseParam::kThetaZ, pred.pose.theta_z, gt.pose.theta_z, dom)) /
          3.0;
  b.l_t = (param_sq_error(PoseParam::kTx, pred.pose.t.x(), gt.pose.t.x(), dom) +
           param_sq_error(PoseParam::kTy, pred.pose.t.y(), gt.pose.t.y(), dom) +
           param_sq_error(PoseParam::kTz, pred.pose.t.z(), gt.pose.t.z(), dom)) /
          3.0;
  b.l_ps = (param_sq_error(PoseParam::kThetaP, pred.pose.theta_p, gt.pose.theta_p, dom) +
            param_sq_error(PoseParam::kThetaS, pred.pose.theta_s, gt.pose.theta_s, dom)) /
           2.0;
  b.l_3d = residual_loss(pred.residuals, gt.residuals, ctx.residual_bound);
  b.l_2dk = keypoint2d_loss(pred.kp2d_ib, gt.kp2d_ib, ctx.visibility, ctx.out_size);

  // Consistency between the predicted 2D keypoints and the crop-mapped
  // projection of the predicted 3D keypoints.
  const KeypointSet3D k3d = repose(
      canonical_keypoints(ctx.mean_template, pred.residuals, ctx.residual_bound), pred.pose);
  const KeypointSet2D proj = project_keypoints(ctx.camera, k3d);
  KeypointSet2D proj_ib;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    proj_ib[i] = apply_crop(ctx.crop, proj[i], ctx.out_size);
  }
  b.l_2dcon = keypoint2d_loss(pred.kp2d_ib, proj_ib, ctx.visibility, ctx.out_size);

  b.l_aux = box_center_loss(pred.box_center, gt.box_center, ctx.camera);
  b.total = weighted_total(b, weights);
  return b;
}

}  // namespace bikepose
