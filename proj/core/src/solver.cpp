#include "bikepose/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "bikepose/error.hpp"

namespace bikepose {
namespace {

struct State {
  Pose8D pose;
  ResidualSet residuals;
};

constexpr std::size_t kRoot = static_cast<std::size_t>(KeypointId::kGroundRoot);

std::size_t num_params(bool with_shape) {
  return kNumPoseParams + (with_shape ? kNumShapeParams : 0);
}

Eigen::VectorXd pack(const State& s, bool with_shape) {
  Eigen::VectorXd x(num_params(with_shape));
  const auto p = s.pose.to_array();
  for (std::size_t i = 0; i < kNumPoseParams; ++i) x[static_cast<Eigen::Index>(i)] = p[i];
  if (with_shape) {
    Eigen::Index k = kNumPoseParams;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      if (i == kRoot) continue;
      x.segment<3>(k) = s.residuals[i];
      k += 3;
    }
  }
  return x;
}

State unpack(const Eigen::VectorXd& x, bool with_shape, const ResidualSet& fixed_residuals) {
  State s;
  std::array<double, kNumPoseParams> p{};
  for (std::size_t i = 0; i < kNumPoseParams; ++i) p[i] = x[static_cast<Eigen::Index>(i)];
  s.pose = Pose8D::from_array(p);
  if (with_shape) {
    Eigen::Index k = kNumPoseParams;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      if (i == kRoot) continue;
      s.residuals[i] = x.segment<3>(k);
      k += 3;
    }
  } else {
    s.residuals = fixed_residuals;
  }
  return s;
}

State project_state(const State& s, const SolverConfig& cfg) {
  State out;
  out.pose = cfg.domain.project(s.pose);
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    Vec3 d = s.residuals[i];
    const double n = d.norm();
    if (n > cfg.residual_bound) d *= cfg.residual_bound / n;
    out.residuals[i] = d;
  }
  return out;
}

double squared_norm_or_penalty(const std::optional<Eigen::VectorXd>& r) {
  if (!r) return kBehindCameraPenalty;
  const double f = r->squaredNorm();
  return std::isfinite(f) ? f : kBehindCameraPenalty;
}

struct LmOutcome {
  State state;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

LmOutcome run_lm(const Observation& obs, const CanonicalTemplate& tmpl, const SolverConfig& cfg,
                 const State& init, bool with_shape) {
  SolverConfig local = cfg;
  local.fit_shape = with_shape;

  LmOutcome out;
  out.state = project_state(init, cfg);
  auto r = residual_vector(obs, tmpl, out.state.pose, out.state.residuals, local, with_shape);
  out.objective = squared_norm_or_penalty(r);
  if (!r) return out;

  double lambda = cfg.lm_lambda_init;
  const Eigen::Index n = static_cast<Eigen::Index>(num_params(with_shape));
  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.iterations = it + 1;
    if (out.objective <= std::numeric_limits<double>::min()) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd J =
        numeric_jacobian(obs, tmpl, out.state.pose, out.state.residuals, local).jacobian;
    const Eigen::VectorXd g = J.transpose() * *r;
    const Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd x = pack(out.state, with_shape);

    bool accepted = false;
    State next;
    std::optional<Eigen::VectorXd> r_next;
    double f_next = out.objective;
    while (lambda < 1e16) {
      Eigen::MatrixXd A = H;
      for (Eigen::Index i = 0; i < n; ++i) A(i, i) += lambda * std::max(H(i, i), 1e-12);
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= cfg.lm_lambda_factor;
        continue;
      }
      next = project_state(unpack(x + step, with_shape, out.state.residuals), cfg);
      r_next = residual_vector(obs, tmpl, next.pose, next.residuals, local, with_shape);
      f_next = squared_norm_or_penalty(r_next);
      if (r_next && f_next < out.objective) {
        accepted = true;
        lambda = std::max(lambda / cfg.lm_lambda_factor, 1e-12);
        break;
      }
      lambda *= cfg.lm_lambda_factor;
    }
    if (!accepted) {
      // No descent direction left at any damping: a stationary point.
      out.converged = true;
      break;
    }
    const double decrease = out.objective - f_next;
    out.state = next;
    out.objective = f_next;
    r = std::move(r_next);
    if (decrease < cfg.converge_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace

int Observation::visible_count() const {
  return static_cast<int>(
      std::count_if(keypoints.begin(), keypoints.end(), [](const auto& k) { return k.has_value(); }));
}

std::array<bool, kNumKeypoints> Observation::visibility() const {
  std::array<bool, kNumKeypoints> v{};
  for (std::size_t i = 0; i < kNumKeypoints; ++i) v[i] = visible(i);
  return v;
}

Observation Observation::from_record(const AnnotationRecord& rec) {
  Observation obs;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (rec.visibility[i]) obs.keypoints[i] = rec.keypoints_2d_i[i];
  }
  obs.bbox = rec.bbox;
  obs.camera = rec.camera;
  return obs;
}

void SolverConfig::validate() const {
  if (yaw_starts < 1 || pedal_starts < 1 || max_iterations < 1) {
    throw InvalidArgumentError("yaw_starts, pedal_starts and max_iterations must be positive");
  }
  if (!(fd_step > 0.0) || !(lm_lambda_init > 0.0) || !(lm_lambda_factor > 1.0) ||
      !(converge_tol >= 0.0) || !(shape_ridge >= 0.0) || !(residual_bound > 0.0)) {
    throw InvalidArgumentError("solver steps, damping and tolerances must be positive");
  }
  domain.validate();
  weights.validate();
}

std::optional<Eigen::VectorXd> residual_vector(const Observation& obs,
                                               const CanonicalTemplate& tmpl, const Pose8D& pose,
                                               const ResidualSet& residuals,
                                               const SolverConfig& cfg, bool with_shape) {
  const int visible = obs.visible_count();
  const Eigen::Index rows = 2 * visible + (with_shape ? 3 * static_cast<Eigen::Index>(kNumKeypoints) : 0);
  Eigen::VectorXd r(rows);

  KeypointSet3D kc;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) kc[i] = tmpl.mean_keypoints[i] + residuals[i];
  const KeypointSet3D k3d = repose(kc, pose);
  const CropTransform crop = crop_from_box(obs.bbox, cfg.out_size);

  Eigen::Index row = 0;
  if (visible > 0) {
    const double w = std::sqrt(cfg.weights.beta5 / (2.0 * visible));
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      if (!obs.visible(i)) continue;
      const Vec3 rel = k3d[i] - obs.camera.position;
      if (!(rel.z() > 1e-6)) return std::nullopt;
      const Vec2 pred = apply_crop(crop, project_point(obs.camera, k3d[i]), cfg.out_size);
      const Vec2 seen = apply_crop(crop, *obs.keypoints[i], cfg.out_size);
      r.segment<2>(row) = w * (normalize_crop_pixel(pred, cfg.out_size) -
                               normalize_crop_pixel(seen, cfg.out_size));
      row += 2;
    }
  }
  if (with_shape) {
    const double w = std::sqrt(cfg.weights.beta4 * cfg.shape_ridge / (3.0 * kNumKeypoints));
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      r.segment<3>(row) = w * residuals[i] / cfg.residual_bound;
      row += 3;
    }
  }
  return r;
}

double objective(const Observation& obs, const CanonicalTemplate& tmpl, const Pose8D& pose,
                 const ResidualSet& residuals, const SolverConfig& cfg) {
  return squared_norm_or_penalty(residual_vector(obs, tmpl, pose, residuals, cfg, true));
}

bool JacobianResult::any_one_sided() const {
  return std::any_of(one_sided.begin(), one_sided.end(), [](bool b) { return b; });
}

JacobianResult numeric_jacobian(const Observation& obs, const CanonicalTemplate& tmpl,
                                const Pose8D& pose, const ResidualSet& residuals,
                                const SolverConfig& cfg) {
  const bool with_shape = cfg.fit_shape;
  const State base{pose, residuals};
  const Eigen::VectorXd x = pack(base, with_shape);
  const auto r0 = residual_vector(obs, tmpl, pose, residuals, cfg, with_shape);
  if (!r0) throw BehindCameraError("Jacobian requested at a pose behind the camera");

  const Eigen::Index n = x.size();
  JacobianResult out;
  out.jacobian = Eigen::MatrixXd::Zero(r0->size(), n);
  out.one_sided.assign(static_cast<std::size_t>(n), false);

  auto eval = [&](const Eigen::VectorXd& xp) {
    const State s = unpack(xp, with_shape, residuals);
    return residual_vector(obs, tmpl, s.pose, s.residuals, cfg, with_shape);
  };

  const double h = cfg.fd_step;
  for (Eigen::Index j = 0; j < n; ++j) {
    bool can_minus = true;
    bool can_plus = true;
    if (j < static_cast<Eigen::Index>(kNumPoseParams)) {
      const Interval& range = cfg.domain.ranges[static_cast<std::size_t>(j)];
      if (!range.periodic) {
        can_minus = x[j] - h >= range.min;
        can_plus = x[j] + h <= range.max;
      }
    }
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += h;
    xm[j] -= h;
    const auto rp = can_plus ? eval(xp) : std::nullopt;
    const auto rm = can_minus ? eval(xm) : std::nullopt;
    if (rp && rm) {
      out.jacobian.col(j) = (*rp - *rm) / (2.0 * h);
    } else if (rp) {
      out.jacobian.col(j) = (*rp - *r0) / h;
      out.one_sided[static_cast<std::size_t>(j)] = true;
    } else if (rm) {
      out.jacobian.col(j) = (*r0 - *rm) / h;
      out.one_sided[static_cast<std::size_t>(j)] = true;
    } else {
      out.one_sided[static_cast<std::size_t>(j)] = true;
    }
  }
  return out;
}

Eigen::VectorXd objective_gradient(const Observation& obs, const CanonicalTemplate& tmpl,
                                   const Pose8D& pose, const ResidualSet& residuals,
                                   const SolverConfig& cfg) {
  SolverConfig rigid = cfg;
  rigid.fit_shape = false;
  const auto r = residual_vector(obs, tmpl, pose, residuals, rigid, false);
  if (!r) throw BehindCameraError("gradient requested at a pose behind the camera");
  const JacobianResult jr = numeric_jacobian(obs, tmpl, pose, residuals, rigid);
  return 2.0 * jr.jacobian.transpose() * *r;
}

Pose8D initial_pose(const Observation& obs, const CanonicalTemplate& tmpl,
                    const SolverConfig& cfg, double yaw) {
  // Vertical extent of the canonical template including the wheel rims; it
  // barely changes with yaw because pitch and roll are small.
  double y_lo = std::numeric_limits<double>::infinity();
  double y_hi = -y_lo;
  for (const Vec3& p : tmpl.mean_keypoints) {
    y_lo = std::min(y_lo, p.y());
    y_hi = std::max(y_hi, p.y());
  }
  for (const Vec3& p : wheel_extent_points(tmpl, tmpl.mean_keypoints)) {
    y_lo = std::min(y_lo, p.y());
    y_hi = std::max(y_hi, p.y());
  }
  const double model_height = y_hi - y_lo;

  // derive_bbox2d grows the tight box by 5% per side.
  const double box_h = obs.bbox.height() / 1.1;
  const Vec2 c = obs.bbox.center();
  const double bottom = c.y() + 0.5 * box_h;
  const double depth = box_h > 0.0 ? obs.camera.fy * model_height / box_h
                                   : cfg.domain[PoseParam::kTz].mid() - obs.camera.position.z();

  Pose8D p;
  p.theta_y = yaw;
  p.t.x() = obs.camera.position.x() + (c.x() - obs.camera.cx) * depth / obs.camera.fx;
  p.t.y() = obs.camera.position.y() + (bottom - obs.camera.cy) * depth / obs.camera.fy;
  p.t.z() = obs.camera.position.z() + depth;
  return cfg.domain.project(p);
}

SolveResult fit_pose(const Observation& obs, const CanonicalTemplate& tmpl,
                     const SolverConfig& cfg) {
  cfg.validate();
  const int visible = obs.visible_count();
  if (visible < kMinVisibleKeypoints) {
    throw UnderConstrainedError("only " + std::to_string(visible) +
                                " visible keypoints; at least " +
                                std::to_string(kMinVisibleKeypoints) + " are needed");
  }

  SolveResult result;
  result.per_start_objectives.reserve(static_cast<std::size_t>(cfg.yaw_starts));
  LmOutcome best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.yaw_starts; ++k) {
    const double yaw = -180.0 + 360.0 * k / cfg.yaw_starts;
    const State init{initial_pose(obs, tmpl, cfg, yaw), ResidualSet::Zero()};
    LmOutcome outcome = run_lm(obs, tmpl, cfg, init, false);
    outcome.objective = objective(obs, tmpl, outcome.state.pose, outcome.state.residuals, cfg);
    // The crank angle is a full circle too: restart from the converged state
    // with the pedals turned to the other seeds.
    const LmOutcome settled = outcome;
    for (int j = 1; j < cfg.pedal_starts; ++j) {
      State restart = settled.state;
      restart.pose.theta_p += 360.0 * j / cfg.pedal_starts;
      LmOutcome alt = run_lm(obs, tmpl, cfg, restart, false);
      alt.objective = objective(obs, tmpl, alt.state.pose, alt.state.residuals, cfg);
      alt.iterations += settled.iterations;
      if (alt.objective < outcome.objective) outcome = std::move(alt);
    }
    result.per_start_objectives.push_back(outcome.objective);
    // Strict comparison keeps the lowest seed index on ties.
    if (outcome.objective < best.objective) {
      best = std::move(outcome);
      result.best_start = k;
    }
  }

  if (cfg.fit_shape) {
    LmOutcome joint = run_lm(obs, tmpl, cfg, best.state, true);
    joint.iterations += best.iterations;
    joint.objective = objective(obs, tmpl, joint.state.pose, joint.state.residuals, cfg);
    best = std::move(joint);
  }

  result.pose = best.state.pose;
  result.residuals = best.state.residuals;
  result.objective = best.objective;
  result.iterations_used = best.iterations;
  result.converged = best.converged;
  return result;
}

}  // namespace bikepose
