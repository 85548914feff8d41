#pragma once

#include <array>
#include <utility>

#include <opencv2/core.hpp>

#include "bikepose/bike_model.hpp"

namespace bikepose::cli {

using SkeletonEdge = std::pair<KeypointId, KeypointId>;

inline constexpr std::array<SkeletonEdge, 10> kSkeletonEdges = {{
    {KeypointId::kGroundRoot, KeypointId::kPedalAxle},
    {KeypointId::kPedalAxle, KeypointId::kSeat},
    {KeypointId::kPedalAxle, KeypointId::kRearWheelCenter},
    {KeypointId::kPedalAxle, KeypointId::kSteeringAxis1},
    {KeypointId::kSteeringAxis1, KeypointId::kSteeringAxis2},
    {KeypointId::kSteeringAxis2, KeypointId::kLeftHandle},
    {KeypointId::kSteeringAxis2, KeypointId::kRightHandle},
    {KeypointId::kSteeringAxis1, KeypointId::kForwardWheelCentre},
    {KeypointId::kPedalAxle, KeypointId::kPedalLeft},
    {KeypointId::kPedalAxle, KeypointId::kPedalRight},
}};

/// Skeleton over `background` (or white when empty), 8-bit BGR of the given size.
cv::Mat render_overlay(const KeypointSet2D& keypoints, const cv::Mat& background,
                       int width = 512, int height = 512);

/// Front (X-Y), top (X-Z) and side (Z-Y) orthographic views of posed
/// keypoints centred on `centre`, side by side.
cv::Mat render_views(const KeypointSet3D& keypoints, const Vec3& centre, int panel = 256,
                     double pixels_per_meter = 150.0);

}  // namespace bikepose::cli
