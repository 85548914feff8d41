#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bikepose/error.hpp"
#include "bikepose/records.hpp"

namespace bikepose {
namespace {

namespace fs = std::filesystem;

class RecordsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bikepose_records_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static Dataset small_dataset(std::size_t per_template = 25) {
    DatasetConfig cfg;
    cfg.n_templates = 4;
    cfg.samples_per_template = static_cast<int>(per_template);
    cfg.seed = 5;
    cfg.occlusion_dropout = 0.2;
    return generate_dataset(cfg, CanonicalTemplate::default_template(), Camera{});
  }

  static std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  static void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << '\n';
  }

  fs::path dir_;
};

TEST_F(RecordsTest, RoundTripIsExact) {
  const Dataset ds = small_dataset();
  ASSERT_EQ(ds.records.size(), 100u);
  write_records(dir_ / "a.jsonl", ds);
  const Dataset back = read_records(dir_ / "a.jsonl");
  EXPECT_EQ(back.header, ds.header);
  EXPECT_EQ(back.records, ds.records);
}

TEST_F(RecordsTest, StreamingWriterMatchesBulkWriter) {
  const Dataset ds = small_dataset(3);
  write_records(dir_ / "bulk.jsonl", ds);
  AnnotationWriter w(dir_ / "stream.jsonl", ds.header);
  for (const auto& r : ds.records) w.write(r);
  w.close();
  EXPECT_EQ(lines_of(dir_ / "bulk.jsonl"), lines_of(dir_ / "stream.jsonl"));
}

TEST_F(RecordsTest, HeaderCarriesSchemaAndCamera) {
  const Dataset ds = small_dataset(1);
  const std::string h = encode_header(ds.header);
  EXPECT_NE(h.find("\"schema\":\"bikepose.annotations\""), std::string::npos);
  EXPECT_NE(h.find("\"version\":1"), std::string::npos);
  EXPECT_NE(h.find("\"template_ids\""), std::string::npos);
  EXPECT_EQ(decode_header(h), ds.header);
}

TEST_F(RecordsTest, RecordFieldNames) {
  const std::string line = encode_record(small_dataset(1).records.front());
  for (const char* key : {"sample_id", "template_id", "split", "pose", "theta_p", "theta_s", "theta_x",
                          "theta_y", "theta_z", "\"tx\"", "\"ty\"", "\"tz\"", "residuals", "kp3d",
                          "kp2d_i", "kp2d_ib", "vis", "bbox", "camera"}) {
    EXPECT_NE(line.find(key), std::string::npos) << key;
  }
}

TEST_F(RecordsTest, TruncatedFinalLineReportsItsLine) {
  write_records(dir_ / "t.jsonl", small_dataset(2));
  auto lines = lines_of(dir_ / "t.jsonl");
  lines.back() = lines.back().substr(0, lines.back().size() / 2);
  write_lines(dir_ / "t.jsonl", lines);
  try {
    read_records(dir_ / "t.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), lines.size());
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(lines.size())), std::string::npos);
  }
}

TEST_F(RecordsTest, MissingKeypointNamesField) {
  const AnnotationRecord rec = small_dataset(1).records.front();
  std::string line = encode_record(rec);
  // Drop the last kp3d entry.
  const auto start = line.find("\"kp3d\":[");
  ASSERT_NE(start, std::string::npos);
  const auto end = line.find("]]", start);
  const auto last = line.rfind(",[", end);
  line.erase(last, end + 1 - last);
  try {
    decode_record(line, 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("kp3d"), std::string::npos) << msg;
    EXPECT_NE(msg.find("got 10"), std::string::npos) << msg;
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST_F(RecordsTest, UnknownVersionRejected) {
  write_records(dir_ / "v.jsonl", small_dataset(1));
  auto lines = lines_of(dir_ / "v.jsonl");
  const auto pos = lines.front().find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  lines.front().replace(pos, 11, "\"version\":9");
  write_lines(dir_ / "v.jsonl", lines);
  try {
    read_records(dir_ / "v.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown schema version"), std::string::npos);
  }
}

TEST_F(RecordsTest, DuplicateIdsRejected) {
  write_records(dir_ / "d.jsonl", small_dataset(1));
  auto lines = lines_of(dir_ / "d.jsonl");
  lines.push_back(lines[1]);
  write_lines(dir_ / "d.jsonl", lines);
  EXPECT_THROW(read_records(dir_ / "d.jsonl"), ParseError);
}

TEST_F(RecordsTest, MissingFileNamesPath) {
  try {
    read_records(dir_ / "nope.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("nope.jsonl"), std::string::npos);
  }
}

TEST_F(RecordsTest, PredictionsRoundTrip) {
  std::vector<PredictionRecord> preds(3);
  preds[0].sample_id = "bike00_00000";
  preds[0].pose.theta_y = 12.345678901234567;
  preds[0].pose.t = Vec3(0.1, -0.2, 0.3);
  preds[0].objective = 1e-17;
  preds[0].converged = true;
  preds[0].iterations = 17;
  preds[1].sample_id = "bike00_00001";
  preds[1].residuals[KeypointId::kSeat] = Vec3(0.01, 0.02, 0.03);
  preds[2].sample_id = "bike00_00002";
  preds[2].error = "under-constrained: 3 visible keypoints";
  write_predictions(dir_ / "p.jsonl", preds);
  const auto back = read_predictions(dir_ / "p.jsonl");
  EXPECT_EQ(back, preds);
  EXPECT_TRUE(back[2].failed());
}

TEST_F(RecordsTest, TemplateRoundTrip) {
  CanonicalTemplate t = CanonicalTemplate::default_template();
  t.wheel_radius = 0.35;
  save_template(dir_ / "t.json", t);
  EXPECT_EQ(load_template(dir_ / "t.json"), t);
}

TEST_F(RecordsTest, MissingTemplateNamesPath) {
  try {
    load_template(dir_ / "missing_template.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("missing_template.json"), std::string::npos);
  }
}

TEST_F(RecordsTest, ConfigParsing) {
  std::ofstream(dir_ / "cfg.json") << R"({"n_templates": 2, "samples_per_template": 3, "seed": 9,
    "domain": {"theta_s": [-45, 45]}, "camera": {"fx": 900}})";
  const GenerateConfig cfg = load_generate_config(dir_ / "cfg.json");
  EXPECT_EQ(cfg.dataset.n_templates, 2);
  EXPECT_EQ(cfg.dataset.samples_per_template, 3);
  EXPECT_EQ(cfg.dataset.seed, 9u);
  EXPECT_DOUBLE_EQ(cfg.dataset.domain[PoseParam::kThetaS].min, -45);
  EXPECT_DOUBLE_EQ(cfg.camera.fx, 900);
  EXPECT_DOUBLE_EQ(cfg.camera.fy, 1000);
  EXPECT_TRUE(cfg.template_path.empty());
}

TEST_F(RecordsTest, ConfigErrorsNameTheField) {
  std::ofstream(dir_ / "bad.json") << R"({"n_templates": 2, "samples": 3})";
  try {
    load_generate_config(dir_ / "bad.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("samples"), std::string::npos);
  }
  std::ofstream(dir_ / "bad2.json") << R"({"train_fraction": "most"})";
  try {
    load_generate_config(dir_ / "bad2.json");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("train_fraction"), std::string::npos);
  }
}

TEST_F(RecordsTest, ConfigTemplatePathIsRelativeToConfig) {
  fs::create_directories(dir_ / "sub");
  std::ofstream(dir_ / "sub" / "cfg.json") << R"({"template": "tmpl.json"})";
  const GenerateConfig cfg = load_generate_config(dir_ / "sub" / "cfg.json");
  EXPECT_EQ(cfg.template_path, dir_ / "sub" / "tmpl.json");
}

}  // namespace
}  // namespace bikepose
