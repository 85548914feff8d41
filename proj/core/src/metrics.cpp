#include "bikepose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bikepose {
namespace {

constexpr double kPlaneEps = 1e-10;

Vec3 newell_normal(const std::vector<Vec3>& poly) {
  Vec3 n = Vec3::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    n += poly[i].cross(poly[(i + 1) % poly.size()]);
  }
  return n;
}

// Orders coplanar points counter-clockwise about `normal`.
std::vector<Vec3> order_cap(std::vector<Vec3> pts, const Vec3& normal) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  const Vec3 n = normal.normalized();
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = n.cross(helper).normalized();
  const Vec3 w = n.cross(u);
  std::sort(pts.begin(), pts.end(), [&](const Vec3& a, const Vec3& b) {
    return std::atan2((a - c).dot(w), (a - c).dot(u)) < std::atan2((b - c).dot(w), (b - c).dot(u));
  });
  return pts;
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

PoseErrors pose_errors(const Rotation3& r_pred, const Vec3& t_pred, const Rotation3& r_gt,
                       const Vec3& t_gt) {
  const Rotation3 rel = r_pred * r_gt.transpose();
  // Same angle as arccos((trace - 1) / 2), evaluated through atan2 so it stays
  // accurate near 0 and 180 degrees.
  const Vec3 axis_sin(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double cos_angle = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  PoseErrors e;
  e.rot_err = rad_to_deg(std::atan2(0.5 * axis_sin.norm(), cos_angle));
  e.trans_err = (t_pred - t_gt).norm();
  return e;
}

PoseErrors pose_errors(const Pose8D& pred, const Pose8D& gt) {
  return pose_errors(pred.rotation(), pred.t, gt.rotation(), gt.t);
}

std::array<double, kNumPoseParams> mae_per_parameter(std::span<const Pose8D> preds,
                                                     std::span<const Pose8D> gts) {
  if (preds.size() != gts.size()) {
    throw InvalidArgumentError("prediction and ground-truth lists differ in length (" +
                               std::to_string(preds.size()) + " vs " +
                               std::to_string(gts.size()) + ")");
  }
  if (preds.empty()) throw InvalidArgumentError("MAE of an empty list");
  std::array<double, kNumPoseParams> sum{};
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto p = preds[s].to_array();
    const auto g = gts[s].to_array();
    for (std::size_t i = 0; i < kNumPoseParams; ++i) {
      sum[i] += i < 5 ? angular_diff(p[i], g[i]) : std::abs(p[i] - g[i]);
    }
  }
  for (double& v : sum) v /= static_cast<double>(preds.size());
  return sum;
}

double Polytope::volume() const {
  double v = 0.0;
  for (const auto& f : faces) {
    for (std::size_t i = 1; i + 1 < f.size(); ++i) v += f[0].dot(f[i].cross(f[i + 1]));
  }
  return v / 6.0;
}

Polytope box_polytope(const OrientedBox3D& box) {
  const auto c = box.corners();
  // Corner index bits are the +x, +y, +z signs.
  static constexpr std::array<std::array<int, 4>, 6> kFaces = {{
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
  }};
  Polytope p;
  for (const auto& idx : kFaces) {
    std::vector<Vec3> face = {c[idx[0]], c[idx[1]], c[idx[2]], c[idx[3]]};
    Vec3 fc = Vec3::Zero();
    for (const Vec3& v : face) fc += v;
    fc /= 4.0;
    // The corner order depends on the handedness of the rotation; fix it up.
    if (newell_normal(face).dot(fc - box.center) < 0.0) std::reverse(face.begin(), face.end());
    p.faces.push_back(std::move(face));
  }
  return p;
}

Polytope clip_polytope(const Polytope& poly, const Vec3& normal, double offset) {
  Polytope out;
  std::vector<Vec3> cap;
  bool clipped = false;
  for (const auto& face : poly.faces) {
    std::vector<Vec3> kept;
    bool inside = false;
    const std::size_t m = face.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3& p = face[i];
      const Vec3& q = face[(i + 1) % m];
      const double dp = normal.dot(p) - offset;
      const double dq = normal.dot(q) - offset;
      if (dp <= kPlaneEps) {
        kept.push_back(p);
        if (dp >= -kPlaneEps) cap.push_back(p);
        inside = inside || dp < -kPlaneEps;
      } else {
        clipped = true;
      }
      if ((dp < -kPlaneEps && dq > kPlaneEps) || (dp > kPlaneEps && dq < -kPlaneEps)) {
        const Vec3 x = p + (q - p) * (dp / (dp - dq));
        kept.push_back(x);
        cap.push_back(x);
      }
    }
    // A face with nothing strictly inside lies on the plane; the cap replaces it.
    if (!inside) {
      clipped = true;
      continue;
    }
    if (kept.size() >= 3) out.faces.push_back(std::move(kept));
  }
  if (clipped && cap.size() >= 3 && !out.faces.empty()) {
    out.faces.push_back(order_cap(std::move(cap), normal));
  }
  return out;
}

double intersection_volume(const OrientedBox3D& a, const OrientedBox3D& b) {
  Polytope poly = box_polytope(b);
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 n = a.rotation.col(axis);
    const double c = n.dot(a.center);
    const double h = a.half_extents[axis];
    poly = clip_polytope(poly, n, c + h);
    if (poly.faces.empty()) return 0.0;
    poly = clip_polytope(poly, -n, -c + h);
    if (poly.faces.empty()) return 0.0;
  }
  return std::max(poly.volume(), 0.0);
}

double iou3d_exact(const OrientedBox3D& a, const OrientedBox3D& b) {
  if (a.center == b.center && a.rotation == b.rotation && a.half_extents == b.half_extents &&
      (a.half_extents.array() > 0.0).all()) {
    return 1.0;
  }
  const double inter = intersection_volume(a, b);
  const double va = box_polytope(a).volume();
  const double vb = box_polytope(b).volume();
  const double uni = va + vb - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d_monte_carlo(const OrientedBox3D& a, const OrientedBox3D& b, std::size_t n,
                         std::uint64_t seed) {
  if (n == 0) throw InvalidArgumentError("Monte-Carlo IoU needs at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fraction_inside = [&](const OrientedBox3D& from, const OrientedBox3D& other) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 local(unit(rng), unit(rng), unit(rng));
      const Vec3 p = from.center + from.rotation * local.cwiseProduct(from.half_extents);
      if (other.contains(p)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
  };
  const double va = a.volume();
  const double vb = b.volume();
  const double inter = 0.5 * (fraction_inside(a, b) * va + fraction_inside(b, a) * vb);
  const double uni = va + vb - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou3d(const OrientedBox3D& a, const OrientedBox3D& b, const IouOptions& opts) {
  return opts.mode == IouMode::kExact ? iou3d_exact(a, b)
                                      : iou3d_monte_carlo(a, b, opts.mc_samples, opts.seed);
}

double add_metric(const Pose8D& pred_pose, const Pose8D& gt_pose,
                  const KeypointSet3D& model_points) {
  const KeypointSet3D p = repose(model_points, pred_pose);
  const KeypointSet3D g = repose(model_points, gt_pose);
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) sum += (p[i] - g[i]).norm();
  return sum / static_cast<double>(kNumKeypoints);
}

double mean_keypoint_distance(const KeypointSet2D& pred, const KeypointSet2D& gt,
                              const std::array<bool, kNumKeypoints>& visibility) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    if (!visibility[i]) continue;
    sum += (pred[i] - gt[i]).norm();
    ++count;
  }
  if (count == 0) throw InvalidArgumentError("sample has no visible keypoints");
  return sum / count;
}

std::vector<double> keypoint2d_ar(std::span<const KeypointSet2D> preds,
                                  std::span<const KeypointSet2D> gts,
                                  std::span<const std::array<bool, kNumKeypoints>> visibility,
                                  std::span<const double> thresholds, bool per_keypoint) {
  if (preds.size() != gts.size() || preds.size() != visibility.size()) {
    throw InvalidArgumentError("2D keypoint lists are not aligned");
  }
  if (preds.empty()) throw InvalidArgumentError("2D AR of an empty sample set");
  std::vector<double> out;
  if (per_keypoint) {
    std::vector<double> dists;
    for (std::size_t s = 0; s < preds.size(); ++s) {
      bool any = false;
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        if (!visibility[s][i]) continue;
        dists.push_back((preds[s][i] - gts[s][i]).norm());
        any = true;
      }
      if (!any) throw InvalidArgumentError("sample " + std::to_string(s) + " has no visible keypoints");
    }
    for (double t : thresholds) {
      out.push_back(average_recall(std::span<const double>(dists), [t](double d) { return d <= t; }));
    }
    return out;
  }
  std::vector<double> means;
  means.reserve(preds.size());
  for (std::size_t s = 0; s < preds.size(); ++s) {
    means.push_back(mean_keypoint_distance(preds[s], gts[s], visibility[s]));
  }
  for (double t : thresholds) {
    out.push_back(average_recall(std::span<const double>(means), [t](double d) { return d <= t; }));
  }
  return out;
}

MetricsReport build_report(const Dataset& dataset, std::span<const PredictionRecord> predictions,
                           const ReportOptions& opts) {
  if (predictions.empty()) throw InvalidArgumentError("empty prediction set");
  if (dataset.records.empty()) throw InvalidArgumentError("empty dataset");

  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sample_id, &p);

  std::vector<std::string> missing;
  for (const auto& rec : dataset.records) {
    if (!by_id.count(rec.sample_id)) missing.push_back(rec.sample_id);
  }
  std::vector<std::string> unknown;
  {
    std::map<std::string, bool> gt_ids;
    for (const auto& rec : dataset.records) gt_ids.emplace(rec.sample_id, true);
    for (const auto& p : predictions) {
      if (!gt_ids.count(p.sample_id)) unknown.push_back(p.sample_id);
    }
  }
  if (!missing.empty() || !unknown.empty()) {
    std::ostringstream os;
    os << "unmatched sample ids";
    auto list = [&](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      os << "; " << label << " (" << ids.size() << "):";
      for (std::size_t i = 0; i < ids.size() && i < 20; ++i) os << ' ' << ids[i];
      if (ids.size() > 20) os << " ...";
    };
    list("no prediction for", missing);
    list("no ground truth for", unknown);
    throw InvalidArgumentError(os.str());
  }

  const auto& tmpl = dataset.header.mean_template;
  const double bound = dataset.header.residual_bound;
  const std::size_t n = dataset.records.size();

  std::vector<Pose8D> pred_poses;
  std::vector<Pose8D> gt_poses;
  std::vector<double> ious;
  std::vector<PoseErrors> errors;
  std::vector<KeypointSet2D> pred_i, gt_i, pred_ib, gt_ib;
  std::vector<std::array<bool, kNumKeypoints>> vis;
  MetricsReport report;
  double add_sum = 0.0;

  for (const auto& rec : dataset.records) {
    const PredictionRecord& pred = *by_id.at(rec.sample_id);
    if (pred.converged) ++report.converged_count;
    if (pred.failed()) ++report.failed_count;
    pred_poses.push_back(pred.pose);
    gt_poses.push_back(rec.pose);

    const KeypointSet3D kc_gt = canonical_keypoints(tmpl, rec.residuals, bound);
    const KeypointSet3D kc_pred = canonical_keypoints(tmpl, pred.residuals, bound);
    const OrientedBox3D box_gt = repose_box(bounding_box_3d(tmpl, kc_gt), rec.pose);
    const OrientedBox3D box_pred = repose_box(bounding_box_3d(tmpl, kc_pred), pred.pose);
    add_sum += add_metric(pred.pose, rec.pose, kc_gt);

    // A failed fit is a miss under every recall criterion.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    KeypointSet2D p_i;
    if (pred.failed()) {
      ious.push_back(0.0);
      errors.push_back(PoseErrors{180.0, kInf});
      for (auto& p : p_i) p = Vec2::Constant(kInf);
    } else {
      ious.push_back(iou3d(box_gt, box_pred, opts.iou));
      errors.push_back(pose_errors(pred.pose, rec.pose));
      try {
        p_i = project_keypoints(rec.camera, repose(kc_pred, pred.pose));
      } catch (const BehindCameraError&) {
        for (auto& p : p_i) p = Vec2::Constant(kInf);
      }
    }
    const CropTransform crop = crop_from_box(rec.bbox);
    KeypointSet2D p_ib;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) p_ib[k] = apply_crop(crop, p_i[k]);
    pred_i.push_back(p_i);
    pred_ib.push_back(p_ib);
    gt_i.push_back(rec.keypoints_2d_i);
    gt_ib.push_back(rec.keypoints_2d_ib);
    vis.push_back(rec.visibility);
  }

  report.sample_count = n;
  report.mae = mae_per_parameter(pred_poses, gt_poses);
  for (std::size_t k = 0; k < kIouThresholds.size(); ++k) {
    const double tau = kIouThresholds[k];
    report.ar_3d[k] = average_recall(std::span<const double>(ious), [tau](double v) { return v >= tau; });
  }
  for (std::size_t k = 0; k < kPoseCriteria.size(); ++k) {
    const PoseCriterion crit = kPoseCriteria[k];
    report.pose_criteria[k] = average_recall(std::span<const PoseErrors>(errors),
                                             [crit](const PoseErrors& e) { return crit.passes(e); });
  }
  report.add = add_sum / static_cast<double>(n);
  const auto ar_i = keypoint2d_ar(pred_i, gt_i, vis, kPixelThresholds, opts.per_keypoint_2d);
  const auto ar_ib = keypoint2d_ar(pred_ib, gt_ib, vis, kPixelThresholds, opts.per_keypoint_2d);
  std::copy(ar_i.begin(), ar_i.end(), report.ar_2d_i.begin());
  std::copy(ar_ib.begin(), ar_ib.end(), report.ar_2d_ib.begin());
  return report;
}

std::string format_report_table(const MetricsReport& r) {
  std::ostringstream os;
  os << "samples: " << r.sample_count << " (converged " << r.converged_count << ", failed "
     << r.failed_count << ")\n\n";

  os << "Per-parameter MAE (deg / m)\n";
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    os << std::setw(10) << pose_param_name(static_cast<PoseParam>(i));
  }
  os << '\n';
  for (double v : r.mae) os << std::setw(10) << std::fixed << std::setprecision(4) << v;
  os << "\n\n";

  os << "6D metrics (AR %, ADD m)\n";
  const std::array<const char*, 8> heads = {"3D_10", "3D_25", "3D_50", "5deg,5cm",
                                            "10deg,10cm", "40deg,20cm", "60deg,30cm", "ADD"};
  for (const char* h : heads) os << std::setw(12) << h;
  os << '\n';
  for (double v : r.ar_3d) os << std::setw(12) << pct(v);
  for (double v : r.pose_criteria) os << std::setw(12) << pct(v);
  os << std::setw(12) << std::fixed << std::setprecision(4) << r.add << "\n\n";

  os << "2D keypoint AR (%)\n";
  os << std::setw(8) << "frame";
  for (double t : kPixelThresholds) os << std::setw(10) << ("2D_" + std::to_string(static_cast<int>(t)) + "pxl");
  os << '\n' << std::setw(8) << "I";
  for (double v : r.ar_2d_i) os << std::setw(10) << pct(v);
  os << '\n' << std::setw(8) << "I_b";
  for (double v : r.ar_2d_ib) os << std::setw(10) << pct(v);
  os << '\n';
  return os.str();
}

std::string format_report_jsonl(const MetricsReport& r) {
  using nlohmann::json;
  json mae = json::object();
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    mae[std::string(pose_param_name(static_cast<PoseParam>(i)))] = r.mae[i];
  }
  json ar3d = json::object();
  for (std::size_t k = 0; k < kIouThresholds.size(); ++k) {
    ar3d["3D_" + std::to_string(static_cast<int>(std::lround(kIouThresholds[k] * 100)))] = r.ar_3d[k];
  }
  json crit = json::object();
  for (std::size_t k = 0; k < kPoseCriteria.size(); ++k) {
    crit[std::to_string(static_cast<int>(kPoseCriteria[k].max_rot_deg)) + "deg," +
         std::to_string(static_cast<int>(std::lround(kPoseCriteria[k].max_trans_m * 100))) + "cm"] =
        r.pose_criteria[k];
  }
  auto ar2d = [](const auto& values) {
    json j = json::object();
    for (std::size_t k = 0; k < kPixelThresholds.size(); ++k) {
      j["2D_" + std::to_string(static_cast<int>(kPixelThresholds[k])) + "pxl"] = values[k];
    }
    return j;
  };
  std::ostringstream os;
  os << json{{"metric", "summary"}, {"samples", r.sample_count}, {"converged", r.converged_count},
             {"failed", r.failed_count}}.dump()
     << '\n';
  os << json{{"metric", "mae"}, {"values", mae}}.dump() << '\n';
  os << json{{"metric", "ar_3d_iou"}, {"values", ar3d}}.dump() << '\n';
  os << json{{"metric", "pose_criteria"}, {"values", crit}}.dump() << '\n';
  os << json{{"metric", "add"}, {"value", r.add}}.dump() << '\n';
  os << json{{"metric", "ar_2d_i"}, {"values", ar2d(r.ar_2d_i)}}.dump() << '\n';
  os << json{{"metric", "ar_2d_ib"}, {"values", ar2d(r.ar_2d_ib)}}.dump() << '\n';
  return os.str();
}

}  // namespace bikepose
