#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "bikepose/geometry.hpp"

namespace bikepose {

inline constexpr std::size_t kNumKeypoints = 11;

enum class KeypointId : int {
  kLeftHandle = 0,
  kRightHandle = 1,
  kForwardWheelCentre = 2,
  kSteeringAxis1 = 3,
  kSteeringAxis2 = 4,
  kPedalRight = 5,
  kPedalLeft = 6,
  kPedalAxle = 7,
  kSeat = 8,
  kGroundRoot = 9,
  kRearWheelCenter = 10,
};

std::string_view keypoint_name(KeypointId id);
std::optional<KeypointId> keypoint_from_name(std::string_view name);

/// Keypoints moved by the steering articulation.
inline constexpr std::array<KeypointId, 3> kSteeringGroup = {
    KeypointId::kLeftHandle, KeypointId::kRightHandle, KeypointId::kForwardWheelCentre};
/// Keypoints moved by the pedal articulation.
inline constexpr std::array<KeypointId, 2> kPedalGroup = {KeypointId::kPedalRight,
                                                          KeypointId::kPedalLeft};

/// Fixed-size array of per-keypoint values, indexable by KeypointId. The tag
/// keeps point sets and residual sets from being mixed up.
template <typename Tag, typename Point>
class KeypointArray {
 public:
  KeypointArray() { points_.fill(Point::Zero()); }

  static KeypointArray Zero() { return KeypointArray(); }

  Point& operator[](KeypointId id) { return points_[static_cast<std::size_t>(id)]; }
  const Point& operator[](KeypointId id) const {
    return points_[static_cast<std::size_t>(id)];
  }
  Point& operator[](std::size_t i) { return points_[i]; }
  const Point& operator[](std::size_t i) const { return points_[i]; }

  static constexpr std::size_t size() { return kNumKeypoints; }
  auto begin() { return points_.begin(); }
  auto end() { return points_.end(); }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool operator==(const KeypointArray& other) const {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      if (points_[i] != other.points_[i]) return false;
    }
    return true;
  }

 private:
  std::array<Point, kNumKeypoints> points_;
};

struct KeypointSet3DTag;
struct ResidualSetTag;
struct KeypointSet2DTag;

using KeypointSet3D = KeypointArray<KeypointSet3DTag, Vec3>;
using ResidualSet = KeypointArray<ResidualSetTag, Vec3>;
using KeypointSet2D = KeypointArray<KeypointSet2DTag, Vec2>;

inline constexpr double kDefaultResidualBound = 0.25;

/// Parameter order used wherever a pose is flattened to a vector.
enum class PoseParam : int { kThetaP, kThetaS, kThetaX, kThetaY, kThetaZ, kTx, kTy, kTz };
inline constexpr std::size_t kNumPoseParams = 8;
std::string_view pose_param_name(PoseParam p);

/// Articulated bicycle pose. Angles in degrees, translation of the ground
/// root keypoint in meters.
struct Pose8D {
  double theta_p = 0.0;
  double theta_s = 0.0;
  double theta_x = 0.0;
  double theta_y = 0.0;
  double theta_z = 0.0;
  Vec3 t = Vec3::Zero();

  std::array<double, kNumPoseParams> to_array() const;
  static Pose8D from_array(const std::array<double, kNumPoseParams>& v);
  double get(PoseParam p) const;
  void set(PoseParam p, double value);

  Rotation3 rotation() const { return rotation_from_euler(theta_x, theta_y, theta_z); }

  bool operator==(const Pose8D& other) const = default;
};

struct CanonicalTemplate {
  KeypointSet3D mean_keypoints;
  double wheel_radius = 0.34;
  double crank_length = 0.17;
  double pedal_lateral_offset = 0.10;
  double box_margin = 0.03;

  static CanonicalTemplate default_template();

  /// Throws InvalidArgumentError when a structural invariant is broken.
  void validate() const;

  bool operator==(const CanonicalTemplate& other) const = default;
};

/// kc = mean + residuals. Throws when any residual norm exceeds `bound`.
KeypointSet3D canonical_keypoints(const CanonicalTemplate& tmpl, const ResidualSet& residuals,
                                  double bound = kDefaultResidualBound);

/// Rigid transforms that repose points attached to each part of the bicycle.
/// Steering rotates about the axis through steering_axis_1 toward
/// steering_axis_2; pedals rotate about +X through the pedal axle; then the
/// body is rotated about the ground root and moved so the root lands at t.
class ReposeTransform {
 public:
  ReposeTransform(const KeypointSet3D& kc, const Pose8D& pose);

  Vec3 body(const Vec3& p) const { return body_rotation_ * (p - root_) + translation_; }
  Vec3 steered(const Vec3& p) const { return body(steer_canonical(p)); }
  Vec3 pedal(const Vec3& p) const { return body(pedal_canonical(p)); }

  /// Articulation alone, still in the canonical frame. A zero angle leaves
  /// the point bit-identical.
  Vec3 steer_canonical(const Vec3& p) const {
    return steer_active_ ? Vec3(steer_pivot_ + steer_rotation_ * (p - steer_pivot_)) : p;
  }
  Vec3 pedal_canonical(const Vec3& p) const {
    return pedal_active_ ? Vec3(pedal_pivot_ + pedal_rotation_ * (p - pedal_pivot_)) : p;
  }

 private:
  bool steer_active_;
  bool pedal_active_;
  Rotation3 body_rotation_;
  Vec3 root_;
  Vec3 translation_;
  Rotation3 steer_rotation_;
  Vec3 steer_pivot_;
  Rotation3 pedal_rotation_;
  Vec3 pedal_pivot_;
};

/// Steering and pedal articulation only, in the canonical frame.
KeypointSet3D articulate(const KeypointSet3D& kc, double theta_p, double theta_s);

KeypointSet3D repose(const KeypointSet3D& kc, const Pose8D& pose);

/// Throws BehindCameraError carrying the offending keypoint index.
KeypointSet2D project_keypoints(const Camera& camera, const KeypointSet3D& k3d);

/// Wheel rim points in canonical pose: each wheel centre moved by
/// +-wheel_radius along Y and Z. Rear wheel first, then front wheel.
std::array<Vec3, 8> wheel_extent_points(const CanonicalTemplate& tmpl, const KeypointSet3D& kc);

/// Axis-aligned canonical box around keypoints and wheel extents, with
/// box_margin added on both X faces.
OrientedBox3D bounding_box_3d(const CanonicalTemplate& tmpl, const KeypointSet3D& kc);

/// Rigid 6D reposing of a canonical box; articulation angles are ignored.
OrientedBox3D repose_box(const OrientedBox3D& box, const Pose8D& pose);

/// Tight box over projected keypoints and wheel extents, grown by 5% of the
/// box size per side and clipped to the image. The front wheel extents follow
/// the steering articulation.
BBox2D derive_bbox2d(const Camera& camera, const CanonicalTemplate& tmpl,
                     const KeypointSet3D& kc, const Pose8D& pose);

}  // namespace bikepose
