#include "bikepose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "bikepose/error.hpp"

namespace bikepose {

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvalidArgumentError("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw InvalidArgumentError("camera image size must be positive");
  }
  if (!position.allFinite() || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidArgumentError("camera parameters must be finite");
  }
}

std::array<Vec3, 8> OrientedBox3D::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? half_extents.x() : -half_extents.x(),
                     (i & 2) ? half_extents.y() : -half_extents.y(),
                     (i & 4) ? half_extents.z() : -half_extents.z());
    out[i] = center + rotation * local;
  }
  return out;
}

double OrientedBox3D::volume() const {
  return 8.0 * half_extents.x() * half_extents.y() * half_extents.z();
}

bool OrientedBox3D::contains(const Vec3& p) const {
  const Vec3 local = rotation.transpose() * (p - center);
  return (local.array().abs() <= half_extents.array()).all();
}

Rotation3 rotation_about_x(double deg) {
  const double c = std::cos(deg_to_rad(deg));
  const double s = std::sin(deg_to_rad(deg));
  Rotation3 r;
  r << 1.0, 0.0, 0.0,
       0.0, c, -s,
       0.0, s, c;
  return r;
}

Rotation3 rotation_about_y(double deg) {
  const double c = std::cos(deg_to_rad(deg));
  const double s = std::sin(deg_to_rad(deg));
  Rotation3 r;
  r << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return r;
}

Rotation3 rotation_about_z(double deg) {
  const double c = std::cos(deg_to_rad(deg));
  const double s = std::sin(deg_to_rad(deg));
  Rotation3 r;
  r << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

Rotation3 rotation_from_euler(double theta_x, double theta_y, double theta_z) {
  return rotation_about_y(theta_y) * rotation_about_x(theta_x) *
         rotation_about_z(theta_z);
}

Rotation3 rotation_about_axis(const Vec3& axis, double deg) {
  return Eigen::AngleAxisd(deg_to_rad(deg), axis.normalized()).toRotationMatrix();
}

Vec2 project_point(const Camera& camera, const Vec3& p) {
  const Vec3 rel = p - camera.position;
  if (!(rel.z() > 1e-6)) {
    throw BehindCameraError("point at depth " + std::to_string(rel.z()) +
                            " m is not in front of the camera");
  }
  return {camera.fx * rel.x() / rel.z() + camera.cx,
          camera.fy * rel.y() / rel.z() + camera.cy};
}

CropTransform crop_from_box(const BBox2D& box, double out_size) {
  if (!box.valid()) {
    throw InvalidArgumentError("degenerate 2D box: zero or negative side");
  }
  const double side = std::max(box.width(), box.height());
  const Vec2 c = box.center();
  return {c.x(), c.y(), out_size / side};
}

Vec2 apply_crop(const CropTransform& crop, const Vec2& uv, double out_size) {
  return {(uv.x() - crop.center_u) * crop.scale + 0.5 * out_size,
          (uv.y() - crop.center_v) * crop.scale + 0.5 * out_size};
}

double angular_diff(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

double wrap_degrees(double a) {
  double w = a - 360.0 * std::floor((a + 180.0) / 360.0);
  // Rounding can land exactly on the open end.
  if (w >= 180.0) w -= 360.0;
  if (w < -180.0) w += 360.0;
  return w;
}

}  // namespace bikepose
