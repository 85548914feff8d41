#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bikepose/metrics.hpp"
#include "bikepose/solver.hpp"

namespace bikepose::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCheckFailed = 3,
};

/// Bad flags or configuration; maps to kExitUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  /// Empty means the built-in desk-scale defaults.
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  int threads = 1;
};

struct FitOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  double noise_px = 0.0;
  std::uint64_t seed = 0;
  bool fit_shape = false;
  int yaw_starts = 8;
  int threads = 1;
};

struct EvalOptions {
  std::filesystem::path data;
  std::filesystem::path predictions;
  std::filesystem::path out = "report.jsonl";
  IouMode iou_mode = IouMode::kExact;
  std::size_t mc_samples = 200000;
  std::uint64_t seed = 0;
  bool per_keypoint_2d = false;
};

struct RenderOptions {
  std::filesystem::path data;
  /// Renders the predicted pose instead of the ground truth when set.
  std::filesystem::path predictions;
  std::string sample_id;
  std::filesystem::path out;
  std::filesystem::path background;
};

struct OracleCheckOptions {
  std::uint64_t seed = 20240611;
  double iou_tol = 0.01;
  std::filesystem::path out = "oracle_check.tsv";
};

/// Each command prints a human-readable summary to `log` and returns an
/// ExitCode. Library errors propagate as exceptions; see exit_code_for.
int run_generate(const GenerateOptions& opts, std::ostream& log);
int run_fit(const FitOptions& opts, std::ostream& log);
int run_eval(const EvalOptions& opts, std::ostream& log);
int run_render(const RenderOptions& opts, std::ostream& log);
int run_oracle_check(const OracleCheckOptions& opts, std::ostream& log);

/// Observation from a record's visible keypoints with optional i.i.d.
/// Gaussian pixel noise drawn from a per-sample stream.
Observation noisy_observation(const AnnotationRecord& rec, double noise_px, std::uint64_t seed,
                              std::size_t index);

/// kExitUsage for UsageError, kExitData for every other error.
int exit_code_for(const std::exception& e);

}  // namespace bikepose::cli
