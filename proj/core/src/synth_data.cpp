#include "bikepose/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>

#include "bikepose/error.hpp"
#include "bikepose/parallel.hpp"

namespace bikepose {
namespace {

// Independent streams derived from the dataset seed.
enum class Stream : std::uint32_t { kRecord = 1, kTemplateShape = 2, kSplit = 3 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double sample_interval(const Interval& r, std::mt19937_64& rng) {
  const double hi = r.periodic ? r.max : std::nextafter(r.max, std::numeric_limits<double>::infinity());
  double v = std::uniform_real_distribution<double>(r.min, hi)(rng);
  return std::min(v, r.max);
}

constexpr std::size_t kChunk = 1024;

}  // namespace

ParamDomain ParamDomain::standard() {
  ParamDomain d;
  d[PoseParam::kThetaP] = {-180.0, 180.0, true};
  d[PoseParam::kThetaS] = {-90.0, 90.0, false};
  d[PoseParam::kThetaX] = {-5.0, 5.0, false};
  d[PoseParam::kThetaY] = {-180.0, 180.0, true};
  d[PoseParam::kThetaZ] = {-5.0, 5.0, false};
  d[PoseParam::kTx] = {-1.0, 1.0, false};
  d[PoseParam::kTy] = {-0.5, 0.5, false};
  d[PoseParam::kTz] = {-5.0, 2.0, false};
  return d;
}

void ParamDomain::validate() const {
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    const auto& r = ranges[i];
    if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.min < r.max)) {
      throw InvalidArgumentError("domain for " +
                                 std::string(pose_param_name(static_cast<PoseParam>(i))) +
                                 " must satisfy min < max");
    }
  }
}

bool ParamDomain::contains(const Pose8D& pose) const {
  const auto v = pose.to_array();
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    const auto& r = ranges[i];
    const bool ok = r.periodic ? (v[i] >= r.min && v[i] < r.max) : (v[i] >= r.min && v[i] <= r.max);
    if (!ok) return false;
  }
  return true;
}

double ParamDomain::project(PoseParam p, double value) const {
  const auto& r = (*this)[p];
  if (r.periodic) {
    double w = value - r.width() * std::floor((value - r.min) / r.width());
    if (w >= r.max) w -= r.width();
    if (w < r.min) w = r.min;
    return w;
  }
  return std::clamp(value, r.min, r.max);
}

Pose8D ParamDomain::project(const Pose8D& pose) const {
  auto v = pose.to_array();
  for (std::size_t i = 0; i < kNumPoseParams; ++i) v[i] = project(static_cast<PoseParam>(i), v[i]);
  return Pose8D::from_array(v);
}

bool ParamDomain::operator==(const ParamDomain& other) const {
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    if (ranges[i].min != other.ranges[i].min || ranges[i].max != other.ranges[i].max ||
        ranges[i].periodic != other.ranges[i].periodic) {
      return false;
    }
  }
  return true;
}

void DatasetConfig::validate() const {
  if (n_templates < 1) throw InvalidArgumentError("n_templates must be >= 1");
  if (samples_per_template < 1) throw InvalidArgumentError("samples_per_template must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgumentError("train_fraction must lie in (0, 1)");
  }
  if (!(residual_sigma >= 0.0)) throw InvalidArgumentError("residual_sigma must be >= 0");
  if (!(residual_bound > 0.0)) throw InvalidArgumentError("residual_bound must be > 0");
  if (!(occlusion_dropout >= 0.0 && occlusion_dropout <= 1.0)) {
    throw InvalidArgumentError("occlusion_dropout must lie in [0, 1]");
  }
  if (max_retries < 1) throw InvalidArgumentError("max_retries must be >= 1");
  domain.validate();
}

std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "val"; }

Pose8D sample_pose(const ParamDomain& domain, std::mt19937_64& rng) {
  std::array<double, kNumPoseParams> v{};
  for (std::size_t i = 0; i < kNumPoseParams; ++i) v[i] = sample_interval(domain.ranges[i], rng);
  return Pose8D::from_array(v);
}

ResidualSet sample_residuals(double sigma, double bound, std::mt19937_64& rng) {
  ResidualSet out;
  if (sigma <= 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    Vec3 d(normal(rng), normal(rng), normal(rng));
    if (static_cast<KeypointId>(i) == KeypointId::kGroundRoot) continue;
    const double n = d.norm();
    if (n > bound) d *= bound / n;
    out[i] = d;
  }
  return out;
}

std::size_t train_count(double train_fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
}

std::vector<Split> assign_splits(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, Stream::kSplit, 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Split> splits(n, Split::kVal);
  const std::size_t n_train = train_count(train_fraction, n);
  for (std::size_t i = 0; i < n_train; ++i) splits[order[i]] = Split::kTrain;
  return splits;
}

std::string template_id_for(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "bike%02d", index);
  return buf;
}

void check_record(const AnnotationRecord& rec, double tol) {
  if (!rec.bbox.valid()) throw InvalidArgumentError(rec.sample_id + ": invalid bbox");
  const KeypointSet2D proj = project_keypoints(rec.camera, rec.keypoints_3d);
  const CropTransform crop = crop_from_box(rec.bbox);
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const auto name = std::string(keypoint_name(static_cast<KeypointId>(i)));
    if ((proj[i] - rec.keypoints_2d_i[i]).norm() > tol) {
      throw InvalidArgumentError(rec.sample_id + ": kp2d_i of " + name +
                                 " disagrees with the projection of kp3d");
    }
    if ((apply_crop(crop, rec.keypoints_2d_i[i]) - rec.keypoints_2d_ib[i]).norm() > tol) {
      throw InvalidArgumentError(rec.sample_id + ": kp2d_ib of " + name +
                                 " disagrees with the crop of kp2d_i");
    }
  }
}

DatasetHeader dataset_header(const DatasetConfig& cfg, const CanonicalTemplate& mean_template,
                             const Camera& camera) {
  DatasetHeader header;
  header.camera = camera;
  header.mean_template = mean_template;
  header.residual_bound = cfg.residual_bound;
  for (int i = 0; i < cfg.n_templates; ++i) header.template_ids.push_back(template_id_for(i));
  return header;
}

DatasetHeader generate_dataset(const DatasetConfig& cfg, const CanonicalTemplate& mean_template,
                               const Camera& camera,
                               const std::function<void(AnnotationRecord&&)>& sink, int threads) {
  cfg.validate();
  mean_template.validate();
  camera.validate();

  const DatasetHeader header = dataset_header(cfg, mean_template, camera);

  std::vector<ResidualSet> shapes;
  std::vector<KeypointSet3D> canonical;
  for (int i = 0; i < cfg.n_templates; ++i) {
    auto rng = make_rng(cfg.seed, Stream::kTemplateShape, static_cast<std::uint64_t>(i));
    shapes.push_back(sample_residuals(cfg.residual_sigma, cfg.residual_bound, rng));
    canonical.push_back(canonical_keypoints(mean_template, shapes.back(), cfg.residual_bound));
  }

  const std::size_t n = cfg.total();
  const std::vector<Split> splits = assign_splits(n, cfg.train_fraction, cfg.seed);

  auto make_record = [&](std::size_t index) {
    const auto tmpl_index = static_cast<int>(index / static_cast<std::size_t>(cfg.samples_per_template));
    const auto within = index % static_cast<std::size_t>(cfg.samples_per_template);
    auto rng = make_rng(cfg.seed, Stream::kRecord, index);
    const KeypointSet3D& kc = canonical[static_cast<std::size_t>(tmpl_index)];

    AnnotationRecord rec;
    rec.template_id = header.template_ids[static_cast<std::size_t>(tmpl_index)];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05zu", rec.template_id.c_str(), within);
    rec.sample_id = buf;
    rec.split = splits[index];
    rec.residuals = shapes[static_cast<std::size_t>(tmpl_index)];
    rec.camera = camera;

    bool accepted = false;
    for (int attempt = 0; attempt < cfg.max_retries && !accepted; ++attempt) {
      rec.pose = sample_pose(cfg.domain, rng);
      rec.keypoints_3d = repose(kc, rec.pose);
      try {
        rec.keypoints_2d_i = project_keypoints(camera, rec.keypoints_3d);
        const Vec2& root = rec.keypoints_2d_i[KeypointId::kGroundRoot];
        if (root.x() < 0.0 || root.x() >= camera.width || root.y() < 0.0 ||
            root.y() >= camera.height) {
          continue;
        }
        rec.bbox = derive_bbox2d(camera, mean_template, kc, rec.pose);
      } catch (const Error&) {
        continue;
      }
      accepted = true;
    }
    if (!accepted) {
      throw RetryBudgetError("sample " + rec.sample_id + ": no valid pose after " +
                             std::to_string(cfg.max_retries) + " draws");
    }

    const CropTransform crop = crop_from_box(rec.bbox);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      rec.keypoints_2d_ib[k] = apply_crop(crop, rec.keypoints_2d_i[k]);
    }
    std::bernoulli_distribution occluded(cfg.occlusion_dropout);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) rec.visibility[k] = !occluded(rng);
    return rec;
  };

  std::vector<std::optional<AnnotationRecord>> slots;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t count = std::min(kChunk, n - begin);
    slots.assign(count, std::nullopt);
    parallel_for(count, threads, [&](std::size_t i) { slots[i] = make_record(begin + i); });
    for (auto& slot : slots) sink(std::move(*slot));
  }
  return header;
}

Dataset generate_dataset(const DatasetConfig& cfg, const CanonicalTemplate& mean_template,
                         const Camera& camera, int threads) {
  Dataset ds;
  ds.header = generate_dataset(
      cfg, mean_template, camera,
      [&](AnnotationRecord&& rec) { ds.records.push_back(std::move(rec)); }, threads);
  return ds;
}

}  // namespace bikepose
