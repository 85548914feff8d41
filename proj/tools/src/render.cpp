#include "bikepose/cli/render.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "bikepose/error.hpp"

namespace bikepose::cli {
namespace {

cv::Scalar colour_for(KeypointId id) {
  switch (id) {
    case KeypointId::kLeftHandle:
    case KeypointId::kRightHandle:
    case KeypointId::kForwardWheelCentre:
      return {40, 40, 220};  // steering group
    case KeypointId::kPedalLeft:
    case KeypointId::kPedalRight:
      return {40, 160, 40};  // pedal group
    default:
      return {200, 90, 20};
  }
}

cv::Point2d to_cv(const Vec2& p) { return {p.x(), p.y()}; }

/// Fixed-point point for sub-pixel drawing.
constexpr int kShift = 4;
cv::Point fixed(const cv::Point2d& p) {
  return {static_cast<int>(std::lround(p.x * (1 << kShift))),
          static_cast<int>(std::lround(p.y * (1 << kShift)))};
}

bool drawable(const Vec2& p) { return p.allFinite() && p.cwiseAbs().maxCoeff() < 1e5; }

void draw_skeleton(cv::Mat& img, const std::array<cv::Point2d, kNumKeypoints>& pts,
                   const std::array<bool, kNumKeypoints>& ok, int radius) {
  for (const auto& [a, b] : kSkeletonEdges) {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    if (!ok[ia] || !ok[ib]) continue;
    cv::line(img, fixed(pts[ia]), fixed(pts[ib]), {90, 90, 90}, 2, cv::LINE_AA, kShift);
  }
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (!ok[i]) continue;
    cv::circle(img, fixed(pts[i]), radius << kShift, colour_for(static_cast<KeypointId>(i)),
               cv::FILLED, cv::LINE_AA, kShift);
  }
}

}  // namespace

cv::Mat render_overlay(const KeypointSet2D& keypoints, const cv::Mat& background, int width,
                       int height) {
  cv::Mat img;
  if (background.empty()) {
    img = cv::Mat(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  } else {
    cv::Mat bgr = background;
    if (bgr.channels() == 1) cv::cvtColor(background, bgr, cv::COLOR_GRAY2BGR);
    if (bgr.channels() == 4) cv::cvtColor(background, bgr, cv::COLOR_BGRA2BGR);
    cv::resize(bgr, img, cv::Size(width, height), 0, 0, cv::INTER_AREA);
  }
  std::array<cv::Point2d, kNumKeypoints> pts;
  std::array<bool, kNumKeypoints> ok{};
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    pts[i] = to_cv(keypoints[i]);
    ok[i] = drawable(keypoints[i]);
  }
  draw_skeleton(img, pts, ok, 4);
  return img;
}

cv::Mat render_views(const KeypointSet3D& keypoints, const Vec3& centre, int panel,
                     double pixels_per_meter) {
  if (panel <= 0 || !(pixels_per_meter > 0.0)) {
    throw InvalidArgumentError("view panel size and scale must be positive");
  }
  cv::Mat img(panel, 3 * panel, CV_8UC3, cv::Scalar(255, 255, 255));
  const double half = 0.5 * panel;
  // Each view picks (horizontal, vertical) world axes; image v grows downward.
  struct View {
    int h_axis;
    int v_axis;
    double v_sign;
    const char* label;
  };
  const std::array<View, 3> views = {{{0, 1, 1.0, "front"}, {0, 2, -1.0, "top"}, {2, 1, 1.0, "side"}}};
  for (std::size_t v = 0; v < views.size(); ++v) {
    cv::Mat roi = img(cv::Rect(static_cast<int>(v) * panel, 0, panel, panel));
    std::array<cv::Point2d, kNumKeypoints> pts;
    std::array<bool, kNumKeypoints> ok{};
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      const Vec3 d = keypoints[i] - centre;
      pts[i] = {half + pixels_per_meter * d[views[v].h_axis],
                half + views[v].v_sign * pixels_per_meter * d[views[v].v_axis]};
      ok[i] = d.allFinite();
    }
    draw_skeleton(roi, pts, ok, 3);
    cv::putText(roi, views[v].label, {8, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
    cv::rectangle(roi, cv::Rect(0, 0, panel, panel), {180, 180, 180}, 1);
  }
  return img;
}

}  // namespace bikepose::cli
