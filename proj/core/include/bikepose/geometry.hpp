#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bikepose {

// World frame: right-handed, +X to the rider's right, +Y down (image v),
// +Z forward. The ground plane is Y = 0.
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Rotation3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kCropSize = 512.0;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Pinhole camera with identity orientation: the optical axis is world +Z.
struct Camera {
  Vec3 position{0.0, -0.75, -12.0};
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 256.0;
  double cy = 256.0;
  int width = 512;
  int height = 512;

  /// Throws InvalidArgumentError on non-positive focal lengths or image size.
  void validate() const;

  bool operator==(const Camera& other) const = default;
};

struct BBox2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  bool valid() const { return x_min < x_max && y_min < y_max; }

  bool operator==(const BBox2D& other) const = default;
};

/// Similarity map from full-image pixels onto the square crop around a box.
struct CropTransform {
  double center_u = 0.0;
  double center_v = 0.0;
  double scale = 1.0;
};

struct OrientedBox3D {
  Vec3 center = Vec3::Zero();
  Rotation3 rotation = Rotation3::Identity();
  Vec3 half_extents = Vec3::Ones();

  /// Corner i has local sign (bit0 ? + : -, bit1 ? + : -, bit2 ? + : -) on x, y, z.
  std::array<Vec3, 8> corners() const;
  double volume() const;
  bool contains(const Vec3& p) const;
};

Rotation3 rotation_about_x(double deg);
Rotation3 rotation_about_y(double deg);
Rotation3 rotation_about_z(double deg);

/// R = R_Y(theta_y) * R_X(theta_x) * R_Z(theta_z), angles in degrees.
Rotation3 rotation_from_euler(double theta_x, double theta_y, double theta_z);

/// Right-hand rotation by `deg` about the unit axis `axis`.
Rotation3 rotation_about_axis(const Vec3& axis, double deg);

/// Throws BehindCameraError when the depth in front of the camera is <= 1e-6.
Vec2 project_point(const Camera& camera, const Vec3& p);

/// Throws InvalidArgumentError for a box with a zero or negative side.
CropTransform crop_from_box(const BBox2D& box, double out_size = kCropSize);

Vec2 apply_crop(const CropTransform& crop, const Vec2& uv, double out_size = kCropSize);

/// Smallest absolute difference between two angles, in [0, 180].
double angular_diff(double a, double b);

/// Wraps an angle in degrees into [-180, 180).
double wrap_degrees(double a);

}  // namespace bikepose
