#include "bikepose/records.hpp"

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bikepose/error.hpp"

namespace bikepose {
namespace {

using nlohmann::json;

// Context string threaded through the decoders so errors name the field.
const json& require(const json& j, const std::string& key, const std::string& ctx = "") {
  if (!j.is_object()) throw ParseError(ctx + "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(ctx + "missing field '" + key + "'");
  return *it;
}

double get_number(const json& j, const std::string& key, const std::string& ctx = "") {
  const json& v = require(j, key, ctx);
  if (!v.is_number()) throw ParseError(ctx + "field '" + key + "' must be a number");
  return v.get<double>();
}

std::string get_string(const json& j, const std::string& key, const std::string& ctx = "") {
  const json& v = require(j, key, ctx);
  if (!v.is_string()) throw ParseError(ctx + "field '" + key + "' must be a string");
  return v.get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> to_vec(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != N) {
    throw ParseError("field '" + what + "' entries must be arrays of " + std::to_string(N) +
                     " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) {
      throw ParseError("field '" + what + "' holds a non-numeric coordinate");
    }
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

template <typename Array>
json points_to_json(const Array& pts) {
  json out = json::array();
  for (const auto& p : pts) {
    json row = json::array();
    for (Eigen::Index i = 0; i < p.size(); ++i) row.push_back(p[i]);
    out.push_back(std::move(row));
  }
  return out;
}

template <typename Array, int N>
Array points_from_json(const json& j, const std::string& key) {
  const json& v = require(j, key);
  if (!v.is_array() || v.size() != kNumKeypoints) {
    throw ParseError("field '" + key + "' must have " + std::to_string(kNumKeypoints) +
                     " entries, got " + std::to_string(v.is_array() ? v.size() : 0));
  }
  Array out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) out[i] = to_vec<N>(v[i], key);
  return out;
}

json camera_to_json(const Camera& c) {
  return json{{"position", {c.position.x(), c.position.y(), c.position.z()}},
              {"fx", c.fx},
              {"fy", c.fy},
              {"cx", c.cx},
              {"cy", c.cy},
              {"width", c.width},
              {"height", c.height}};
}

Camera camera_from_json(const json& j) {
  const std::string ctx = "camera: ";
  Camera c;
  c.position = to_vec<3>(require(j, "position", ctx), "camera.position");
  c.fx = get_number(j, "fx", ctx);
  c.fy = get_number(j, "fy", ctx);
  c.cx = get_number(j, "cx", ctx);
  c.cy = get_number(j, "cy", ctx);
  c.width = static_cast<int>(get_number(j, "width", ctx));
  c.height = static_cast<int>(get_number(j, "height", ctx));
  try {
    c.validate();
  } catch (const InvalidArgumentError& e) {
    throw ParseError(ctx + e.what());
  }
  return c;
}

// Partial camera override on top of the defaults, used by config files.
Camera camera_override(const json& j, Camera c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "position") {
      c.position = to_vec<3>(value, "camera.position");
    } else if (key == "fx" || key == "fy" || key == "cx" || key == "cy" || key == "width" ||
               key == "height") {
      if (!value.is_number()) throw ParseError("camera: field '" + key + "' must be a number");
      const double v = value.get<double>();
      if (key == "fx") c.fx = v;
      if (key == "fy") c.fy = v;
      if (key == "cx") c.cx = v;
      if (key == "cy") c.cy = v;
      if (key == "width") c.width = static_cast<int>(v);
      if (key == "height") c.height = static_cast<int>(v);
    } else {
      throw ParseError("camera: unknown field '" + key + "'");
    }
  }
  try {
    c.validate();
  } catch (const InvalidArgumentError& e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
  return c;
}

json template_to_json(const CanonicalTemplate& t) {
  json kps = json::object();
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const Vec3& p = t.mean_keypoints[i];
    kps[std::string(keypoint_name(static_cast<KeypointId>(i)))] = {p.x(), p.y(), p.z()};
  }
  return json{{"keypoints", kps},
              {"wheel_radius", t.wheel_radius},
              {"crank_length", t.crank_length},
              {"pedal_lateral_offset", t.pedal_lateral_offset},
              {"box_margin", t.box_margin}};
}

CanonicalTemplate template_from_json(const json& j) {
  const std::string ctx = "template: ";
  CanonicalTemplate t;
  const json& kps = require(j, "keypoints", ctx);
  if (!kps.is_object()) throw ParseError(ctx + "field 'keypoints' must be an object");
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const std::string name(keypoint_name(static_cast<KeypointId>(i)));
    t.mean_keypoints[i] = to_vec<3>(require(kps, name, ctx + "keypoints: "), "keypoints." + name);
  }
  for (const auto& [key, value] : kps.items()) {
    if (!keypoint_from_name(key)) throw ParseError(ctx + "unknown keypoint '" + key + "'");
  }
  t.wheel_radius = get_number(j, "wheel_radius", ctx);
  t.crank_length = get_number(j, "crank_length", ctx);
  t.pedal_lateral_offset = get_number(j, "pedal_lateral_offset", ctx);
  t.box_margin = get_number(j, "box_margin", ctx);
  try {
    t.validate();
  } catch (const InvalidArgumentError& e) {
    throw ParseError(ctx + e.what());
  }
  return t;
}

json pose_to_json(const Pose8D& p) {
  json out = json::object();
  const auto v = p.to_array();
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    out[std::string(pose_param_name(static_cast<PoseParam>(i)))] = v[i];
  }
  return out;
}

Pose8D pose_from_json(const json& j) {
  std::array<double, kNumPoseParams> v{};
  for (std::size_t i = 0; i < kNumPoseParams; ++i) {
    v[i] = get_number(j, std::string(pose_param_name(static_cast<PoseParam>(i))), "pose: ");
  }
  return Pose8D::from_array(v);
}

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
}

void check_header_schema(const json& j, const char* schema) {
  const std::string got = get_string(j, "schema", "header: ");
  if (got != schema) {
    throw ParseError("header: expected schema '" + std::string(schema) + "', got '" + got + "'",
                     1);
  }
  const double version = get_number(j, "version", "header: ");
  if (version != kRecordSchemaVersion) {
    throw ParseError("header: unknown schema version " + require(j, "version").dump(), 1);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

CanonicalTemplate load_template(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error("template file '" + path.string() + "' does not exist");
  }
  try {
    return template_from_json(read_json_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_template(const std::filesystem::path& path, const CanonicalTemplate& tmpl) {
  auto out = open_output(path);
  out << template_to_json(tmpl).dump(2) << '\n';
}

GenerateConfig load_generate_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error("config file '" + path.string() + "' does not exist");
  }
  const json j = read_json_file(path);
  if (!j.is_object()) throw ParseError(path.string() + ": config must be a JSON object");

  GenerateConfig cfg;
  auto& d = cfg.dataset;
  auto integer = [&](const std::string& key, const json& v) {
    if (!v.is_number_integer()) {
      throw ParseError(path.string() + ": field '" + key + "' must be an integer");
    }
    return v.get<long long>();
  };
  auto number = [&](const std::string& key, const json& v) {
    if (!v.is_number()) throw ParseError(path.string() + ": field '" + key + "' must be a number");
    return v.get<double>();
  };

  for (const auto& [key, value] : j.items()) {
    if (key == "n_templates") {
      d.n_templates = static_cast<int>(integer(key, value));
    } else if (key == "samples_per_template") {
      d.samples_per_template = static_cast<int>(integer(key, value));
    } else if (key == "train_fraction") {
      d.train_fraction = number(key, value);
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        throw ParseError(path.string() + ": field 'seed' must be a non-negative integer");
      }
      d.seed = value.get<std::uint64_t>();
    } else if (key == "residual_sigma") {
      d.residual_sigma = number(key, value);
    } else if (key == "residual_bound") {
      d.residual_bound = number(key, value);
    } else if (key == "occlusion_dropout") {
      d.occlusion_dropout = number(key, value);
    } else if (key == "max_retries") {
      d.max_retries = static_cast<int>(integer(key, value));
    } else if (key == "domain") {
      if (!value.is_object()) throw ParseError(path.string() + ": field 'domain' must be an object");
      for (const auto& [pname, range] : value.items()) {
        bool found = false;
        for (std::size_t i = 0; i < kNumPoseParams; ++i) {
          if (pose_param_name(static_cast<PoseParam>(i)) == pname) {
            const Vec2 r = to_vec<2>(range, "domain." + pname);
            d.domain.ranges[i].min = r.x();
            d.domain.ranges[i].max = r.y();
            found = true;
          }
        }
        if (!found) throw ParseError(path.string() + ": unknown domain parameter '" + pname + "'");
      }
    } else if (key == "camera") {
      try {
        cfg.camera = camera_override(value, cfg.camera);
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
      }
    } else if (key == "template") {
      if (!value.is_string()) throw ParseError(path.string() + ": field 'template' must be a path");
      std::filesystem::path p = value.get<std::string>();
      if (p.is_relative()) p = path.parent_path() / p;
      cfg.template_path = p;
    } else {
      throw ParseError(path.string() + ": unknown field '" + key + "'");
    }
  }
  try {
    d.validate();
  } catch (const InvalidArgumentError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return cfg;
}

std::string encode_header(const DatasetHeader& header) {
  json j{{"schema", kAnnotationSchema},
         {"version", kRecordSchemaVersion},
         {"camera", camera_to_json(header.camera)},
         {"template_ids", header.template_ids},
         {"template", template_to_json(header.mean_template)},
         {"residual_bound", header.residual_bound}};
  return j.dump();
}

DatasetHeader decode_header(const std::string& line) {
  const json j = parse_line(line, 1);
  try {
    check_header_schema(j, kAnnotationSchema);
    DatasetHeader h;
    h.camera = camera_from_json(require(j, "camera", "header: "));
    h.mean_template = template_from_json(require(j, "template", "header: "));
    const json& ids = require(j, "template_ids", "header: ");
    if (!ids.is_array()) throw ParseError("header: field 'template_ids' must be an array");
    for (const auto& id : ids) {
      if (!id.is_string()) throw ParseError("header: template ids must be strings");
      h.template_ids.push_back(id.get<std::string>());
    }
    h.residual_bound = get_number(j, "residual_bound", "header: ");
    return h;
  } catch (const ParseError& e) {
    if (e.line() > 0) throw;
    throw ParseError(e.what(), 1);
  }
}

std::string encode_record(const AnnotationRecord& rec) {
  json vis = json::array();
  for (bool v : rec.visibility) vis.push_back(v);
  json j{{"sample_id", rec.sample_id},
         {"template_id", rec.template_id},
         {"split", std::string(split_name(rec.split))},
         {"pose", pose_to_json(rec.pose)},
         {"residuals", points_to_json(rec.residuals)},
         {"kp3d", points_to_json(rec.keypoints_3d)},
         {"kp2d_i", points_to_json(rec.keypoints_2d_i)},
         {"kp2d_ib", points_to_json(rec.keypoints_2d_ib)},
         {"vis", vis},
         {"bbox", {rec.bbox.x_min, rec.bbox.y_min, rec.bbox.x_max, rec.bbox.y_max}},
         {"camera", camera_to_json(rec.camera)}};
  return j.dump();
}

AnnotationRecord decode_record(const std::string& line, std::size_t line_no) {
  const json j = parse_line(line, line_no);
  try {
    AnnotationRecord rec;
    rec.sample_id = get_string(j, "sample_id");
    rec.template_id = get_string(j, "template_id");
    const std::string split = get_string(j, "split");
    if (split == "train") {
      rec.split = Split::kTrain;
    } else if (split == "val") {
      rec.split = Split::kVal;
    } else {
      throw ParseError("field 'split' must be 'train' or 'val'");
    }
    rec.pose = pose_from_json(require(j, "pose"));
    rec.residuals = points_from_json<ResidualSet, 3>(j, "residuals");
    rec.keypoints_3d = points_from_json<KeypointSet3D, 3>(j, "kp3d");
    rec.keypoints_2d_i = points_from_json<KeypointSet2D, 2>(j, "kp2d_i");
    rec.keypoints_2d_ib = points_from_json<KeypointSet2D, 2>(j, "kp2d_ib");
    const json& vis = require(j, "vis");
    if (!vis.is_array() || vis.size() != kNumKeypoints) {
      throw ParseError("field 'vis' must have " + std::to_string(kNumKeypoints) + " entries");
    }
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      if (!vis[i].is_boolean()) throw ParseError("field 'vis' entries must be booleans");
      rec.visibility[i] = vis[i].get<bool>();
    }
    const auto box = to_vec<4>(require(j, "bbox"), "bbox");
    rec.bbox = {box[0], box[1], box[2], box[3]};
    rec.camera = camera_from_json(require(j, "camera"));
    return rec;
  } catch (const ParseError& e) {
    if (e.line() > 0) throw;
    throw ParseError(e.what(), line_no);
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_no);
  }
}

AnnotationWriter::AnnotationWriter(const std::filesystem::path& path, const DatasetHeader& header)
    : out_(open_output(path)), path_(path) {
  out_ << encode_header(header) << '\n';
}

void AnnotationWriter::write(const AnnotationRecord& rec) { out_ << encode_record(rec) << '\n'; }

void AnnotationWriter::close() {
  out_.close();
  if (out_.fail()) throw Error("failed writing '" + path_.string() + "'");
}

void write_records(const std::filesystem::path& path, const Dataset& ds) {
  AnnotationWriter w(path, ds.header);
  for (const auto& rec : ds.records) w.write(rec);
  w.close();
}

Dataset read_records(const std::filesystem::path& path) {
  auto in = open_input(path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty file, expected a header line", 1);
  ++line_no;
  ds.header = decode_header(line);
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ds.records.push_back(decode_record(line, line_no));
    if (!seen.insert(ds.records.back().sample_id).second) {
      throw ParseError("duplicate sample_id '" + ds.records.back().sample_id + "'", line_no);
    }
  }
  return ds;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& preds) {
  auto out = open_output(path);
  out << json{{"schema", kPredictionSchema}, {"version", kRecordSchemaVersion}}.dump() << '\n';
  for (const auto& p : preds) {
    json j{{"sample_id", p.sample_id},
           {"pose", pose_to_json(p.pose)},
           {"residuals", points_to_json(p.residuals)},
           {"objective", p.objective},
           {"converged", p.converged},
           {"iterations", p.iterations}};
    if (p.failed()) j["error"] = p.error;
    out << j.dump() << '\n';
  }
  out.close();
  if (out.fail()) throw Error("failed writing '" + path.string() + "'");
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file, expected a header line", 1);
  try {
    check_header_schema(parse_line(line, 1), kPredictionSchema);
  } catch (const ParseError& e) {
    if (e.line() > 0) throw;
    throw ParseError(e.what(), 1);
  }
  std::vector<PredictionRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no);
    try {
      PredictionRecord p;
      p.sample_id = get_string(j, "sample_id");
      p.pose = pose_from_json(require(j, "pose"));
      p.residuals = points_from_json<ResidualSet, 3>(j, "residuals");
      p.objective = get_number(j, "objective");
      const json& conv = require(j, "converged");
      if (!conv.is_boolean()) throw ParseError("field 'converged' must be a boolean");
      p.converged = conv.get<bool>();
      p.iterations = static_cast<int>(get_number(j, "iterations"));
      if (auto it = j.find("error"); it != j.end()) p.error = it->get<std::string>();
      out.push_back(std::move(p));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

}  // namespace bikepose
