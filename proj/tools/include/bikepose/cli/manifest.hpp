#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bikepose::cli {

/// Provenance record written beside every command output as
/// `<out>.manifest.json`.
struct RunManifest {
  std::string command;
  /// Resolved option values, in the order they were recorded.
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string tool_version;
  double duration_s = 0.0;

  void set(const std::string& key, const std::string& value);
  std::string to_json() const;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& out);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& out);

/// Wall-clock timer started on construction.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

const char* tool_version();

}  // namespace bikepose::cli
