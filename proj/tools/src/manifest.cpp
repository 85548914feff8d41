#include "bikepose/cli/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "bikepose/error.hpp"

namespace bikepose::cli {

const char* tool_version() { return BIKEPOSE_VERSION; }

void RunManifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : config) {
    if (k == key) {
      v = value;
      return;
    }
  }
  config.emplace_back(key, value);
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = seed;
  auto paths = [](const std::vector<std::filesystem::path>& ps) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& p : ps) a.push_back(p.string());
    return a;
  };
  j["inputs"] = paths(inputs);
  j["outputs"] = paths(outputs);
  j["tool_version"] = tool_version;
  j["duration_s"] = duration_s;
  return j.dump(2);
}

std::filesystem::path manifest_path_for(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& out) {
  const auto path = manifest_path_for(out);
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << manifest.to_json() << '\n';
}

}  // namespace bikepose::cli
