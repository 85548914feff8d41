#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "bikepose/synth_data.hpp"

namespace bikepose {

// Annotation and prediction files are line-delimited JSON. The first line is
// a header object carrying "schema" and "version"; every following line is
// one record.
inline constexpr int kRecordSchemaVersion = 1;
inline constexpr const char* kAnnotationSchema = "bikepose.annotations";
inline constexpr const char* kPredictionSchema = "bikepose.predictions";

/// One fitted sample. `error` is non-empty when fitting failed; the pose and
/// residuals are then meaningless.
struct PredictionRecord {
  std::string sample_id;
  Pose8D pose;
  ResidualSet residuals;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string error;

  bool failed() const { return !error.empty(); }
  bool operator==(const PredictionRecord& other) const = default;
};

CanonicalTemplate load_template(const std::filesystem::path& path);
void save_template(const std::filesystem::path& path, const CanonicalTemplate& tmpl);

/// Generator settings plus the optional camera and template path they use.
struct GenerateConfig {
  DatasetConfig dataset;
  Camera camera;
  /// Empty means the built-in default template.
  std::filesystem::path template_path;
};

/// Relative template paths resolve against the config file's directory.
/// Throws ParseError naming the offending field.
GenerateConfig load_generate_config(const std::filesystem::path& path);

/// Streams records to disk one line at a time.
class AnnotationWriter {
 public:
  AnnotationWriter(const std::filesystem::path& path, const DatasetHeader& header);
  void write(const AnnotationRecord& rec);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

void write_records(const std::filesystem::path& path, const Dataset& ds);
/// Throws ParseError with the 1-based line number of the first bad line.
Dataset read_records(const std::filesystem::path& path);

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& preds);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

// Single-line codecs, exposed for tests and tools.
std::string encode_record(const AnnotationRecord& rec);
AnnotationRecord decode_record(const std::string& line, std::size_t line_no = 0);
std::string encode_header(const DatasetHeader& header);
DatasetHeader decode_header(const std::string& line);

}  // namespace bikepose
