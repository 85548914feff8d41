#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bikepose/bike_model.hpp"

namespace bikepose {

struct Interval {
  double min = 0.0;
  double max = 0.0;
  /// Full-circle angle: sampled half-open, wrapped rather than clamped.
  bool periodic = false;

  double width() const { return max - min; }
  double mid() const { return 0.5 * (min + max); }
};

/// Operating range for each pose parameter, in PoseParam order.
struct ParamDomain {
  std::array<Interval, kNumPoseParams> ranges;

  /// theta_p [-180,180), theta_s [-90,90], theta_x [-5,5], theta_y [-180,180),
  /// theta_z [-5,5] degrees; tx [-1,1], ty [-0.5,0.5], tz [-5,2] meters.
  static ParamDomain standard();

  const Interval& operator[](PoseParam p) const { return ranges[static_cast<std::size_t>(p)]; }
  Interval& operator[](PoseParam p) { return ranges[static_cast<std::size_t>(p)]; }

  void validate() const;
  bool contains(const Pose8D& pose) const;
  /// Wraps periodic parameters into [min, max) and clamps the others.
  Pose8D project(const Pose8D& pose) const;
  double project(PoseParam p, double value) const;

  bool operator==(const ParamDomain& other) const;
};

struct DatasetConfig {
  int n_templates = 23;
  int samples_per_template = 50;
  double train_fraction = 0.75;
  std::uint64_t seed = 0;
  ParamDomain domain = ParamDomain::standard();
  double residual_sigma = 0.02;
  double residual_bound = kDefaultResidualBound;
  double occlusion_dropout = 0.0;
  int max_retries = 100;

  void validate() const;
  std::size_t total() const {
    return static_cast<std::size_t>(n_templates) * static_cast<std::size_t>(samples_per_template);
  }
};

enum class Split { kTrain, kVal };
std::string_view split_name(Split s);

struct AnnotationRecord {
  std::string sample_id;
  std::string template_id;
  Split split = Split::kTrain;
  Pose8D pose;
  ResidualSet residuals;
  KeypointSet3D keypoints_3d;
  KeypointSet2D keypoints_2d_i;
  KeypointSet2D keypoints_2d_ib;
  std::array<bool, kNumKeypoints> visibility{};
  BBox2D bbox;
  Camera camera;

  bool operator==(const AnnotationRecord& other) const = default;
};

/// Header metadata shared by every record of a dataset file.
struct DatasetHeader {
  Camera camera;
  CanonicalTemplate mean_template;
  std::vector<std::string> template_ids;
  double residual_bound = kDefaultResidualBound;

  bool operator==(const DatasetHeader& other) const = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<AnnotationRecord> records;
};

/// Each parameter i.i.d. uniform on its interval.
Pose8D sample_pose(const ParamDomain& domain, std::mt19937_64& rng);

/// Zero-mean Gaussian components, each vector clamped to norm <= bound. The
/// ground_root residual is always zero: the root is the canonical origin.
ResidualSet sample_residuals(double sigma, double bound, std::mt19937_64& rng);

/// round-half-up of train_fraction * n.
std::size_t train_count(double train_fraction, std::size_t n);

/// Train/val tags for n records from a seeded shuffle.
std::vector<Split> assign_splits(std::size_t n, double train_fraction, std::uint64_t seed);

std::string template_id_for(int index);

/// Throws InvalidArgumentError naming the first broken invariant.
void check_record(const AnnotationRecord& rec, double tol = 1e-6);

/// Header that generate_dataset reports for these inputs, available before
/// any record is produced.
DatasetHeader dataset_header(const DatasetConfig& cfg, const CanonicalTemplate& mean_template,
                             const Camera& camera);

/// Emits n_templates * samples_per_template records in deterministic order.
/// Each template id is an instance of the mean template with its own shape
/// residuals; poses whose root projects outside the image are redrawn.
DatasetHeader generate_dataset(const DatasetConfig& cfg, const CanonicalTemplate& mean_template,
                               const Camera& camera,
                               const std::function<void(AnnotationRecord&&)>& sink,
                               int threads = 1);

Dataset generate_dataset(const DatasetConfig& cfg, const CanonicalTemplate& mean_template,
                         const Camera& camera, int threads = 1);

}  // namespace bikepose
