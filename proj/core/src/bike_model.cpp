#include "bikepose/bike_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bikepose/error.hpp"

namespace bikepose {
namespace {

constexpr std::array<std::string_view, kNumKeypoints> kKeypointNames = {
    "left_handle", "right_handle", "forward_wheel_centre", "steering_axis_1",
    "steering_axis_2", "pedal_right", "pedal_left", "pedal_axle",
    "seat", "ground_root", "rear_wheel_center"};

constexpr std::array<std::string_view, kNumPoseParams> kPoseParamNames = {
    "theta_p", "theta_s", "theta_x", "theta_y", "theta_z", "tx", "ty", "tz"};

bool in_group(KeypointId id, const auto& group) {
  return std::find(group.begin(), group.end(), id) != group.end();
}

}  // namespace

std::string_view keypoint_name(KeypointId id) {
  return kKeypointNames[static_cast<std::size_t>(id)];
}

std::optional<KeypointId> keypoint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (kKeypointNames[i] == name) return static_cast<KeypointId>(i);
  }
  return std::nullopt;
}

std::string_view pose_param_name(PoseParam p) {
  return kPoseParamNames[static_cast<std::size_t>(p)];
}

std::array<double, kNumPoseParams> Pose8D::to_array() const {
  return {theta_p, theta_s, theta_x, theta_y, theta_z, t.x(), t.y(), t.z()};
}

Pose8D Pose8D::from_array(const std::array<double, kNumPoseParams>& v) {
  Pose8D p;
  p.theta_p = v[0];
  p.theta_s = v[1];
  p.theta_x = v[2];
  p.theta_y = v[3];
  p.theta_z = v[4];
  p.t = Vec3(v[5], v[6], v[7]);
  return p;
}

double Pose8D::get(PoseParam p) const {
  return to_array()[static_cast<std::size_t>(p)];
}

void Pose8D::set(PoseParam p, double value) {
  auto v = to_array();
  v[static_cast<std::size_t>(p)] = value;
  *this = from_array(v);
}

CanonicalTemplate CanonicalTemplate::default_template() {
  CanonicalTemplate t;
  auto& k = t.mean_keypoints;
  k[KeypointId::kGroundRoot] = Vec3(0.0, 0.0, 0.0);
  k[KeypointId::kPedalAxle] = Vec3(0.0, -0.29, 0.0);
  k[KeypointId::kPedalRight] = Vec3(0.10, -0.29, 0.17);
  k[KeypointId::kPedalLeft] = Vec3(-0.10, -0.29, -0.17);
  k[KeypointId::kSeat] = Vec3(0.0, -0.95, -0.20);
  k[KeypointId::kRearWheelCenter] = Vec3(0.0, -0.34, -0.46);
  k[KeypointId::kForwardWheelCentre] = Vec3(0.0, -0.34, 0.56);
  k[KeypointId::kSteeringAxis1] = Vec3(0.0, -0.70, 0.44);
  k[KeypointId::kSteeringAxis2] = Vec3(0.0, -0.98, 0.35);
  k[KeypointId::kLeftHandle] = Vec3(-0.21, -1.00, 0.33);
  k[KeypointId::kRightHandle] = Vec3(0.21, -1.00, 0.33);
  t.wheel_radius = 0.34;
  t.crank_length = 0.17;
  t.pedal_lateral_offset = 0.10;
  t.box_margin = 0.03;
  return t;
}

void CanonicalTemplate::validate() const {
  constexpr double kTol = 1e-6;
  const auto& k = mean_keypoints;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (!k[i].allFinite()) {
      throw InvalidArgumentError("template keypoint " +
                                 std::string(keypoint_name(static_cast<KeypointId>(i))) +
                                 " is not finite");
    }
  }
  if (!(wheel_radius > 0.0) || !(crank_length > 0.0) || !(pedal_lateral_offset >= 0.0) ||
      !(box_margin >= 0.0)) {
    throw InvalidArgumentError(
        "template constants must be positive (wheel_radius, crank_length) or "
        "non-negative (pedal_lateral_offset, box_margin)");
  }
  if ((k[KeypointId::kSteeringAxis1] - k[KeypointId::kSteeringAxis2]).norm() < kTol) {
    throw InvalidArgumentError("steering_axis_1 and steering_axis_2 coincide");
  }
  if (k[KeypointId::kGroundRoot].norm() > kTol) {
    throw InvalidArgumentError("ground_root must be at the canonical origin");
  }
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (k[i].y() > kTol) {
      throw InvalidArgumentError(
          "keypoint " + std::string(keypoint_name(static_cast<KeypointId>(i))) +
          " lies below ground_root");
    }
  }
  const Vec3& axle = k[KeypointId::kPedalAxle];
  const Vec3 right = k[KeypointId::kPedalRight] - axle;
  const Vec3 left = k[KeypointId::kPedalLeft] - axle;
  for (const Vec3* crank : {&right, &left}) {
    if (std::abs(crank->tail<2>().norm() - crank_length) > kTol) {
      throw InvalidArgumentError("pedal is not crank_length from the pedal axle");
    }
  }
  if (std::abs(right.x() - pedal_lateral_offset) > kTol ||
      std::abs(left.x() + pedal_lateral_offset) > kTol) {
    throw InvalidArgumentError("pedals are not at +-pedal_lateral_offset from the axle");
  }
  if ((right.tail<2>() + left.tail<2>()).norm() > kTol) {
    throw InvalidArgumentError("pedal cranks are not 180 degrees apart");
  }
}

KeypointSet3D canonical_keypoints(const CanonicalTemplate& tmpl, const ResidualSet& residuals,
                                  double bound) {
  KeypointSet3D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (!residuals[i].allFinite() || residuals[i].norm() > bound) {
      throw InvalidArgumentError(
          "residual for " + std::string(keypoint_name(static_cast<KeypointId>(i))) +
          " exceeds the norm bound " + std::to_string(bound) + " m");
    }
    out[i] = tmpl.mean_keypoints[i] + residuals[i];
  }
  return out;
}

ReposeTransform::ReposeTransform(const KeypointSet3D& kc, const Pose8D& pose)
    : steer_active_(pose.theta_s != 0.0),
      pedal_active_(pose.theta_p != 0.0),
      body_rotation_(pose.rotation()),
      root_(kc[KeypointId::kGroundRoot]),
      translation_(pose.t),
      steer_rotation_(rotation_about_axis(
          kc[KeypointId::kSteeringAxis2] - kc[KeypointId::kSteeringAxis1], pose.theta_s)),
      steer_pivot_(kc[KeypointId::kSteeringAxis1]),
      pedal_rotation_(rotation_about_x(pose.theta_p)),
      pedal_pivot_(kc[KeypointId::kPedalAxle]) {}

KeypointSet3D articulate(const KeypointSet3D& kc, double theta_p, double theta_s) {
  Pose8D pose;
  pose.theta_p = theta_p;
  pose.theta_s = theta_s;
  const ReposeTransform xf(kc, pose);
  KeypointSet3D out = kc;
  for (KeypointId id : kSteeringGroup) out[id] = xf.steer_canonical(kc[id]);
  for (KeypointId id : kPedalGroup) out[id] = xf.pedal_canonical(kc[id]);
  return out;
}

KeypointSet3D repose(const KeypointSet3D& kc, const Pose8D& pose) {
  const ReposeTransform xf(kc, pose);
  KeypointSet3D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const auto id = static_cast<KeypointId>(i);
    if (in_group(id, kSteeringGroup)) {
      out[i] = xf.steered(kc[i]);
    } else if (in_group(id, kPedalGroup)) {
      out[i] = xf.pedal(kc[i]);
    } else {
      out[i] = xf.body(kc[i]);
    }
  }
  // Exact anchoring, independent of rounding in R * 0.
  out[KeypointId::kGroundRoot] = pose.t;
  return out;
}

KeypointSet2D project_keypoints(const Camera& camera, const KeypointSet3D& k3d) {
  KeypointSet2D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    try {
      out[i] = project_point(camera, k3d[i]);
    } catch (const BehindCameraError& e) {
      throw BehindCameraError(
          std::string(keypoint_name(static_cast<KeypointId>(i))) + ": " + e.what(),
          static_cast<int>(i));
    }
  }
  return out;
}

std::array<Vec3, 8> wheel_extent_points(const CanonicalTemplate& tmpl, const KeypointSet3D& kc) {
  std::array<Vec3, 8> out;
  const double r = tmpl.wheel_radius;
  const std::array<Vec3, 4> offsets = {Vec3(0, r, 0), Vec3(0, -r, 0), Vec3(0, 0, r),
                                       Vec3(0, 0, -r)};
  const Vec3& rear = kc[KeypointId::kRearWheelCenter];
  const Vec3& front = kc[KeypointId::kForwardWheelCentre];
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = rear + offsets[i];
    out[4 + i] = front + offsets[i];
  }
  return out;
}

OrientedBox3D bounding_box_3d(const CanonicalTemplate& tmpl, const KeypointSet3D& kc) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  auto extend = [&](const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const Vec3& p : kc) extend(p);
  for (const Vec3& p : wheel_extent_points(tmpl, kc)) extend(p);
  lo.x() -= tmpl.box_margin;
  hi.x() += tmpl.box_margin;

  OrientedBox3D box;
  box.center = 0.5 * (lo + hi);
  box.half_extents = 0.5 * (hi - lo);
  box.rotation = Rotation3::Identity();
  return box;
}

OrientedBox3D repose_box(const OrientedBox3D& box, const Pose8D& pose) {
  const Rotation3 r = pose.rotation();
  OrientedBox3D out;
  out.center = r * box.center + pose.t;
  out.rotation = r * box.rotation;
  out.half_extents = box.half_extents;
  return out;
}

BBox2D derive_bbox2d(const Camera& camera, const CanonicalTemplate& tmpl,
                     const KeypointSet3D& kc, const Pose8D& pose) {
  const ReposeTransform xf(kc, pose);
  const KeypointSet3D posed = repose(kc, pose);
  const auto wheels = wheel_extent_points(tmpl, kc);

  double u_lo = std::numeric_limits<double>::infinity();
  double v_lo = u_lo;
  double u_hi = -u_lo;
  double v_hi = -u_lo;
  auto extend = [&](const Vec3& p) {
    const Vec2 uv = project_point(camera, p);
    u_lo = std::min(u_lo, uv.x());
    u_hi = std::max(u_hi, uv.x());
    v_lo = std::min(v_lo, uv.y());
    v_hi = std::max(v_hi, uv.y());
  };
  for (const Vec3& p : posed) extend(p);
  for (std::size_t i = 0; i < 4; ++i) extend(xf.body(wheels[i]));
  for (std::size_t i = 4; i < 8; ++i) extend(xf.steered(wheels[i]));

  const double pad_u = 0.05 * (u_hi - u_lo);
  const double pad_v = 0.05 * (v_hi - v_lo);
  BBox2D box{std::clamp(u_lo - pad_u, 0.0, static_cast<double>(camera.width)),
             std::clamp(v_lo - pad_v, 0.0, static_cast<double>(camera.height)),
             std::clamp(u_hi + pad_u, 0.0, static_cast<double>(camera.width)),
             std::clamp(v_hi + pad_v, 0.0, static_cast<double>(camera.height))};
  if (!box.valid()) {
    throw InvalidArgumentError("2D box is degenerate after clipping to the image");
  }
  return box;
}

}  // namespace bikepose
