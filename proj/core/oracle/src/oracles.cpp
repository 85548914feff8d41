#include "bikepose/oracle/oracles.hpp"

#include <cmath>
#include <sstream>

#include "bikepose/metrics.hpp"

namespace bikepose::oracle {
namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

Eigen::Vector3d apply(const Mat4& m, const Eigen::Vector3d& p) {
  const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
  const Eigen::Vector4d out = m * h;
  return out.head<3>() / out[3];
}

std::string describe(const Pose8D& p) {
  std::ostringstream os;
  os.precision(17);
  os << "{theta_p: " << p.theta_p << ", theta_s: " << p.theta_s << ", theta_x: " << p.theta_x
     << ", theta_y: " << p.theta_y << ", theta_z: " << p.theta_z << ", t: [" << p.t.x() << ", "
     << p.t.y() << ", " << p.t.z() << "]}";
  return os.str();
}

std::string describe(const OrientedBox3D& b) {
  std::ostringstream os;
  os.precision(17);
  os << "{center: [" << b.center.transpose() << "], half_extents: [" << b.half_extents.transpose()
     << "], rotation: [" << Eigen::Map<const Eigen::Matrix<double, 9, 1>>(b.rotation.data()).transpose()
     << "]}";
  return os.str();
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

Eigen::Matrix3d axis_x(double deg) {
  const double c = std::cos(deg * kDeg), s = std::sin(deg * kDeg);
  Eigen::Matrix3d m;
  m(0, 0) = 1; m(0, 1) = 0; m(0, 2) = 0;
  m(1, 0) = 0; m(1, 1) = c; m(1, 2) = -s;
  m(2, 0) = 0; m(2, 1) = s; m(2, 2) = c;
  return m;
}

Eigen::Matrix3d axis_y(double deg) {
  const double c = std::cos(deg * kDeg), s = std::sin(deg * kDeg);
  Eigen::Matrix3d m;
  m(0, 0) = c;  m(0, 1) = 0; m(0, 2) = s;
  m(1, 0) = 0;  m(1, 1) = 1; m(1, 2) = 0;
  m(2, 0) = -s; m(2, 1) = 0; m(2, 2) = c;
  return m;
}

Eigen::Matrix3d axis_z(double deg) {
  const double c = std::cos(deg * kDeg), s = std::sin(deg * kDeg);
  Eigen::Matrix3d m;
  m(0, 0) = c; m(0, 1) = -s; m(0, 2) = 0;
  m(1, 0) = s; m(1, 1) = c;  m(1, 2) = 0;
  m(2, 0) = 0; m(2, 1) = 0;  m(2, 2) = 1;
  return m;
}

Mat4 translation(const Eigen::Vector3d& t) {
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

Mat4 homogeneous(const Eigen::Matrix3d& r) {
  Mat4 m = Mat4::Identity();
  m.block<3, 3>(0, 0) = r;
  return m;
}

Mat4 rotation_about_line(const Eigen::Vector3d& pivot, const Eigen::Vector3d& direction,
                         double deg) {
  const Eigen::Vector3d k = direction / direction.norm();
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(),
        k.z(), 0, -k.x(),
        -k.y(), k.x(), 0;
  const double th = deg * kDeg;
  const Eigen::Matrix3d r =
      Eigen::Matrix3d::Identity() + std::sin(th) * kx + (1.0 - std::cos(th)) * kx * kx;
  return translation(pivot) * homogeneous(r) * translation(-pivot);
}

KeypointSet3D repose_homogeneous(const KeypointSet3D& kc, const Pose8D& pose) {
  const Eigen::Vector3d root = kc[KeypointId::kGroundRoot];
  const Mat4 body = translation(pose.t) *
                    homogeneous(axis_y(pose.theta_y) * axis_x(pose.theta_x) * axis_z(pose.theta_z)) *
                    translation(-root);
  const Mat4 steer = rotation_about_line(
      kc[KeypointId::kSteeringAxis1],
      kc[KeypointId::kSteeringAxis2] - kc[KeypointId::kSteeringAxis1], pose.theta_s);
  const Mat4 pedal =
      rotation_about_line(kc[KeypointId::kPedalAxle], Eigen::Vector3d::UnitX(), pose.theta_p);

  KeypointSet3D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    Mat4 m = body;
    switch (static_cast<KeypointId>(i)) {
      case KeypointId::kLeftHandle:
      case KeypointId::kRightHandle:
      case KeypointId::kForwardWheelCentre:
        m = body * steer;
        break;
      case KeypointId::kPedalLeft:
      case KeypointId::kPedalRight:
        m = body * pedal;
        break;
      default:
        break;
    }
    out[i] = apply(m, kc[i]);
  }
  return out;
}

Pose8D random_pose(std::mt19937_64& rng) {
  Pose8D p;
  p.theta_p = uniform(rng, -180, 180);
  p.theta_s = uniform(rng, -90, 90);
  p.theta_x = uniform(rng, -5, 5);
  p.theta_y = uniform(rng, -180, 180);
  p.theta_z = uniform(rng, -5, 5);
  p.t = Vec3(uniform(rng, -1, 1), uniform(rng, -0.5, 0.5), uniform(rng, -5, 2));
  return p;
}

ResidualSet random_residuals(std::mt19937_64& rng, double radius) {
  ResidualSet r;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (static_cast<KeypointId>(i) == KeypointId::kGroundRoot) continue;
    Vec3 d;
    do {
      d = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    } while (d.squaredNorm() > 1.0);
    r[i] = radius * d;
  }
  return r;
}

std::pair<OrientedBox3D, OrientedBox3D> random_overlapping_boxes(std::mt19937_64& rng) {
  auto random_rotation = [&] {
    return Eigen::Matrix3d(axis_z(uniform(rng, -180, 180)) * axis_y(uniform(rng, -180, 180)) *
                           axis_x(uniform(rng, -180, 180)));
  };
  OrientedBox3D a;
  a.center = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  a.rotation = random_rotation();
  a.half_extents = Vec3(uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0));
  OrientedBox3D b;
  b.rotation = random_rotation();
  b.half_extents = Vec3(uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0));
  // Offset below the smaller box's shortest half side keeps the centres
  // inside each other, so the boxes always overlap.
  const double reach = std::min(a.half_extents.minCoeff(), b.half_extents.minCoeff());
  Vec3 dir(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  dir.normalize();
  b.center = a.center + uniform(rng, 0.0, 0.95 * reach) * dir;
  return {a, b};
}

Eigen::VectorXd finite_difference_gradient(const Observation& obs, const CanonicalTemplate& tmpl,
                                           const Pose8D& pose, const ResidualSet& residuals,
                                           const SolverConfig& cfg, double step) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(kNumPoseParams));
  const auto base = pose.to_array();
  auto f = [&](std::size_t i, double delta) {
    auto v = base;
    v[i] += delta;
    return objective(obs, tmpl, Pose8D::from_array(v), residuals, cfg);
  };
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    g[static_cast<Eigen::Index>(i)] =
        (-f(i, 2 * step) + 8 * f(i, step) - 8 * f(i, -step) + f(i, -2 * step)) / (12 * step);
  }
  return g;
}

bool gradients_agree(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel_tol) {
  if (a.size() != b.size()) return false;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double tol = rel_tol * std::max(std::abs(a[i]), std::abs(b[i])) + rel_tol * 1e-3 * scale;
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

SuiteResult kinematics_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "kinematics: homogeneous-matrix oracle + articulation invariants";
  std::mt19937_64 rng(opts.seed);
  const CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  const std::array<KeypointId, 6> body_group = {
      KeypointId::kSteeringAxis1, KeypointId::kSteeringAxis2, KeypointId::kPedalAxle,
      KeypointId::kSeat, KeypointId::kGroundRoot, KeypointId::kRearWheelCenter};
  const std::array<KeypointId, 5> steer_group = {
      KeypointId::kLeftHandle, KeypointId::kRightHandle, KeypointId::kForwardWheelCentre,
      KeypointId::kSteeringAxis1, KeypointId::kSteeringAxis2};

  for (std::size_t draw = 0; draw < opts.kinematics_draws; ++draw) {
    ++res.total;
    const Pose8D pose = random_pose(rng);
    const ResidualSet resid = random_residuals(rng, 0.05);
    const KeypointSet3D kc = canonical_keypoints(tmpl, resid);
    const KeypointSet3D got = repose(kc, pose);
    const KeypointSet3D want = repose_homogeneous(kc, pose);

    std::string failure;
    for (std::size_t i = 0; i < kNumKeypoints && failure.empty(); ++i) {
      if ((got[i] - want[i]).norm() > opts.kinematics_tol) {
        failure = "oracle mismatch at " + std::string(keypoint_name(static_cast<KeypointId>(i)));
      }
    }
    if (failure.empty() && !(got[KeypointId::kGroundRoot] == pose.t)) failure = "root not anchored at t";

    auto check_rigid = [&](const auto& group, const char* what) {
      for (std::size_t a = 0; a < group.size(); ++a) {
        for (std::size_t b = a + 1; b < group.size(); ++b) {
          const double d0 = (kc[group[a]] - kc[group[b]]).norm();
          const double d1 = (got[group[a]] - got[group[b]]).norm();
          if (std::abs(d0 - d1) > opts.kinematics_tol && failure.empty()) {
            failure = std::string("rigid distance changed in ") + what;
          }
        }
      }
    };
    check_rigid(body_group, "body group");
    check_rigid(steer_group, "steering group");
    for (KeypointId pedal : {KeypointId::kPedalRight, KeypointId::kPedalLeft}) {
      const double d0 = (kc[pedal] - kc[KeypointId::kPedalAxle]).norm();
      const double d1 = (got[pedal] - got[KeypointId::kPedalAxle]).norm();
      if (std::abs(d0 - d1) > opts.kinematics_tol && failure.empty()) failure = "crank length changed";
    }

    const KeypointSet3D steered = articulate(kc, 0.0, pose.theta_s);
    const KeypointSet3D pedalled = articulate(kc, pose.theta_p, 0.0);
    for (std::size_t i = 0; i < kNumKeypoints && failure.empty(); ++i) {
      const auto id = static_cast<KeypointId>(i);
      const bool is_steer = std::find(kSteeringGroup.begin(), kSteeringGroup.end(), id) != kSteeringGroup.end();
      const bool is_pedal = std::find(kPedalGroup.begin(), kPedalGroup.end(), id) != kPedalGroup.end();
      if (!is_steer && !(steered[i] == kc[i])) failure = "steering moved a non-steering keypoint";
      if (!is_pedal && !(pedalled[i] == kc[i])) failure = "pedal rotation moved a non-pedal keypoint";
    }

    if (failure.empty()) {
      ++res.passed;
    } else if (res.first_failure.empty()) {
      res.first_failure = failure + " for pose " + describe(pose);
    }
  }
  return res;
}

SuiteResult iou_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "iou3d: exact clipping vs Monte-Carlo";
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);

  ++res.total;
  OrientedBox3D a, b;
  a.half_extents = b.half_extents = Vec3::Constant(0.5);
  b.center = Vec3(0.5, 0.0, 0.0);
  const double cube = iou3d_exact(a, b);
  if (cube == 1.0 / 3.0) {
    ++res.passed;
  } else {
    std::ostringstream os;
    os.precision(17);
    os << "unit cubes offset by 0.5 gave " << cube << ", expected 1/3";
    res.first_failure = os.str();
  }

  for (std::size_t i = 0; i < opts.iou_pairs; ++i) {
    ++res.total;
    const auto [p, q] = random_overlapping_boxes(rng);
    const double exact = iou3d_exact(p, q);
    const double mc = iou3d_monte_carlo(p, q, opts.iou_mc_samples, opts.seed + i);
    if (std::abs(exact - mc) <= opts.iou_tol) {
      ++res.passed;
    } else if (res.first_failure.empty()) {
      std::ostringstream os;
      os.precision(17);
      os << "pair " << i << ": exact " << exact << " vs monte_carlo " << mc << " (tol "
         << opts.iou_tol << "); a = " << describe(p) << ", b = " << describe(q);
      res.first_failure = os.str();
    }
  }
  return res;
}

SuiteResult gradient_suite(const SuiteOptions& opts) {
  SuiteResult res;
  res.name = "gradient: finite differences vs solver Jacobian";
  std::mt19937_64 rng(opts.seed ^ 0x5bd1e995ULL);
  const CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  SolverConfig cfg;
  const Camera cam;

  for (std::size_t i = 0; i < opts.gradient_points; ++i) {
    ++res.total;
    Pose8D truth = random_pose(rng);
    // Keep the body angles clear of the domain clamp so the objective is smooth.
    truth.theta_s = uniform(rng, -80, 80);
    truth.theta_x = uniform(rng, -4, 4);
    truth.theta_z = uniform(rng, -4, 4);
    truth.t = Vec3(uniform(rng, -0.9, 0.9), uniform(rng, -0.4, 0.4), uniform(rng, -4.9, 1.9));
    const KeypointSet3D posed = repose(tmpl.mean_keypoints, truth);
    Observation obs;
    const KeypointSet2D uv = project_keypoints(cam, posed);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) obs.keypoints[k] = uv[k];
    obs.camera = cam;
    obs.bbox = derive_bbox2d(cam, tmpl, tmpl.mean_keypoints, truth);

    Pose8D at = truth;
    at.theta_p += uniform(rng, -10, 10);
    at.theta_s += uniform(rng, -5, 5);
    at.theta_x += uniform(rng, -0.5, 0.5);
    at.theta_y += uniform(rng, -10, 10);
    at.theta_z += uniform(rng, -0.5, 0.5);
    at.t += Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
    at = cfg.domain.project(at);

    const Eigen::VectorXd fd = finite_difference_gradient(obs, tmpl, at, ResidualSet::Zero(), cfg);
    const Eigen::VectorXd internal = objective_gradient(obs, tmpl, at, ResidualSet::Zero(), cfg);
    if (gradients_agree(fd, internal, opts.gradient_rel_tol)) {
      ++res.passed;
    } else if (res.first_failure.empty()) {
      std::ostringstream os;
      os.precision(17);
      os << "point " << i << " at " << describe(at) << ": fd [" << fd.transpose() << "] vs solver ["
         << internal.transpose() << "]";
      res.first_failure = os.str();
    }
  }
  return res;
}

std::vector<SuiteResult> run_all(const SuiteOptions& opts) {
  return {kinematics_suite(opts), iou_suite(opts), gradient_suite(opts)};
}

}  // namespace bikepose::oracle
