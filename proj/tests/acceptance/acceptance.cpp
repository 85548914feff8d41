// End-to-end acceptance run. Drives the bikepose executable the way a user
// would and prints one PASS/FAIL line per criterion.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bikepose/losses.hpp"
#include "bikepose/metrics.hpp"
#include "bikepose/oracle/oracles.hpp"
#include "bikepose/records.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bikepose;

namespace {

const fs::path kExe = BIKEPOSE_EXE;
const fs::path kConfigs = BIKEPOSE_CONFIG_DIR;

struct Timed {
  int code = -1;
  double seconds = 0.0;
};

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

Timed run(const std::string& args, const fs::path& log) {
  const std::string cmd = quote(kExe) + " " + args + " > " + quote(log) + " 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  Timed t;
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  t.code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Report lines keyed by their "metric" field.
std::map<std::string, json> read_report(const fs::path& p) {
  std::map<std::string, json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out[j.at("metric").get<std::string>()] = j;
  }
  return out;
}

std::map<std::string, double> mae_of(const std::map<std::string, json>& report) {
  std::map<std::string, double> m;
  for (const auto& [k, v] : report.at("mae").at("values").items()) m[k] = v.get<double>();
  return m;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

class Tally {
 public:
  void record(int id, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail
              << std::endl;
    failures_ += ok ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

struct Workspace {
  fs::path dir;
  fs::path desk;
  fs::path clean;
  Workspace() {
    dir = fs::temp_directory_path() / ("bikepose_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    desk = dir / "desk.jsonl";
    clean = dir / "desk_noise_free.jsonl";
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

// [1] Ground truth fed back as predictions must score perfectly, quickly.
void perfect_oracle(Tally& t, const Workspace& ws) {
  const Dataset ds = read_records(ws.desk);
  std::vector<PredictionRecord> preds;
  for (const auto& r : ds.records) {
    PredictionRecord p;
    p.sample_id = r.sample_id;
    p.pose = r.pose;
    p.residuals = r.residuals;
    p.converged = true;
    preds.push_back(p);
  }
  const fs::path pred_path = ws.dir / "gt_preds.jsonl";
  const fs::path report_path = ws.dir / "gt_report.jsonl";
  write_predictions(pred_path, preds);
  const Timed e = run("eval --data " + quote(ws.desk) + " --pred " + quote(pred_path) +
                          " --out " + quote(report_path),
                      ws.dir / "gt_eval.log");
  if (e.code != 0) {
    t.record(1, "perfect-oracle evaluation", false, "eval exited " + std::to_string(e.code));
    return;
  }
  const auto report = read_report(report_path);
  bool ok = e.seconds < 10.0;
  std::string why;
  for (const auto& [k, v] : mae_of(report)) {
    if (v != 0.0) {
      ok = false;
      why += " mae." + k + "=" + fmt(v);
    }
  }
  for (const char* key : {"ar_3d_iou", "pose_criteria", "ar_2d_i", "ar_2d_ib"}) {
    for (const auto& [k, v] : report.at(key).at("values").items()) {
      if (v.get<double>() != 100.0) {
        ok = false;
        why += std::string(" ") + key + "." + k + "=" + fmt(v.get<double>());
      }
    }
  }
  const double add = report.at("add").at("value").get<double>();
  if (add != 0.0) {
    ok = false;
    why += " add=" + fmt(add);
  }
  t.record(1, "perfect-oracle evaluation", ok,
           std::to_string(ds.records.size()) + " samples, eval " + fmt(e.seconds) + " s" +
               (why.empty() ? ", all MAE 0, all AR 100, ADD 0" : why));
}

struct FitRun {
  bool ok = false;
  std::map<std::string, double> mae;
  std::size_t samples = 0;
  std::size_t converged = 0;
  double fit_seconds = 0.0;
  std::string error;
};

FitRun fit_and_eval(const Workspace& ws, const std::string& tag, const std::string& extra) {
  FitRun r;
  const fs::path pred = ws.dir / (tag + "_preds.jsonl");
  const fs::path report = ws.dir / (tag + "_report.jsonl");
  const Timed f = run("fit --data " + quote(ws.clean) + " --out " + quote(pred) +
                          " --threads 1 " + extra,
                      ws.dir / (tag + "_fit.log"));
  r.fit_seconds = f.seconds;
  if (f.code != 0) {
    r.error = "fit exited " + std::to_string(f.code);
    return r;
  }
  const Timed e = run("eval --data " + quote(ws.clean) + " --pred " + quote(pred) + " --out " +
                          quote(report),
                      ws.dir / (tag + "_eval.log"));
  if (e.code != 0) {
    r.error = "eval exited " + std::to_string(e.code);
    return r;
  }
  const auto rep = read_report(report);
  r.mae = mae_of(rep);
  r.samples = rep.at("summary").at("samples").get<std::size_t>();
  r.converged = rep.at("summary").at("converged").get<std::size_t>();
  r.ok = true;
  return r;
}

// [2] Noise-free fitting recovers the generating pose.
FitRun round_trip(Tally& t, const Workspace& ws) {
  FitRun r = fit_and_eval(ws, "clean", "");
  if (!r.ok) {
    t.record(2, "noise-free round trip", false, r.error);
    return r;
  }
  const auto& m = r.mae;
  const bool angles = m.at("theta_x") <= 1.0 && m.at("theta_y") <= 1.0 && m.at("theta_z") <= 1.0;
  const bool joints = m.at("theta_p") <= 2.0 && m.at("theta_s") <= 2.0;
  const bool trans = m.at("tx") <= 0.01 && m.at("ty") <= 0.01 && m.at("tz") <= 0.01;
  const double rate = static_cast<double>(r.converged) / static_cast<double>(r.samples);
  const bool ok = angles && joints && trans && rate >= 0.95 && r.fit_seconds < 300.0;
  std::string detail;
  for (const auto& [k, v] : m) detail += k + "=" + fmt(v) + " ";
  detail += "converged " + std::to_string(r.converged) + "/" + std::to_string(r.samples) +
            ", fit " + fmt(r.fit_seconds) + " s";
  t.record(2, "noise-free round trip", ok, detail);
  return r;
}

// [3] Keypoint noise degrades every parameter, articulation most.
void noise_sensitivity(Tally& t, const Workspace& ws, const FitRun& clean) {
  const FitRun noisy = fit_and_eval(ws, "noisy", "--noise-px 2 --seed 11");
  if (!noisy.ok || !clean.ok) {
    t.record(3, "noise sensitivity", false, noisy.ok ? "no clean baseline" : noisy.error);
    return;
  }
  bool ok = true;
  std::string detail;
  for (const auto& [k, v] : noisy.mae) {
    if (!(v > clean.mae.at(k))) ok = false;
    detail += k + " " + fmt(clean.mae.at(k)) + "->" + fmt(v) + " ";
  }
  const double body = std::max({noisy.mae.at("theta_x"), noisy.mae.at("theta_y"),
                                noisy.mae.at("theta_z")});
  const double joint = std::min(noisy.mae.at("theta_p"), noisy.mae.at("theta_s"));
  if (!(joint > body)) ok = false;
  detail += "| min joint " + fmt(joint) + " vs max body " + fmt(body);
  t.record(3, "noise sensitivity", ok, detail);
}

// [4] Exact 3D IoU against Monte Carlo and a closed-form case.
void iou_check(Tally& t) {
  oracle::SuiteOptions opts;
  const auto suite = oracle::iou_suite(opts);

  OrientedBox3D a;
  a.center = Vec3(0, 0, 0);
  a.half_extents = Vec3(1, 1, 1);
  OrientedBox3D b = a;
  b.center = Vec3(1, 0, 0);
  const double half = iou3d_exact(a, b);
  const bool exact_ok = std::abs(half - 1.0 / 3.0) <= 1e-12;

  t.record(4, "3D IoU", suite.ok() && exact_ok,
           std::to_string(suite.passed) + "/" + std::to_string(suite.total) +
               " cases within 0.01 of Monte Carlo, shifted-cube IoU " + fmt(half) +
               (suite.first_failure.empty() ? "" : ", first failure " + suite.first_failure));
}

// [5] Closed-form reposing against homogeneous matrix chains.
void kinematics_check(Tally& t) {
  oracle::SuiteOptions opts;
  const auto suite = oracle::kinematics_suite(opts);
  t.record(5, "kinematics", suite.ok(),
           std::to_string(suite.passed) + "/" + std::to_string(suite.total) +
               " draws within 1e-9" +
               (suite.first_failure.empty() ? "" : ", first failure " + suite.first_failure));
}

// [6] Loss terms on a hand-computed fixture plus objective gradients.
void loss_check(Tally& t) {
  LossContext ctx;
  ctx.crop = CropTransform{256.0, 256.0, 1.0};
  Pose8D gt_pose;
  gt_pose.theta_p = -170;
  Pose8D pred_pose = gt_pose;
  pred_pose.theta_p = 170;
  pred_pose.theta_x = 2.5;
  pred_pose.t.x() = 0.5;
  ResidualSet pred_res;
  pred_res[KeypointId::kSeat] = Vec3(0.05, 0.0, 0.0);

  LossSample pred;
  pred.pose = pred_pose;
  pred.residuals = pred_res;
  const KeypointSet2D uv = project_keypoints(
      ctx.camera,
      repose(canonical_keypoints(ctx.mean_template, pred_res, ctx.residual_bound), pred_pose));
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    pred.kp2d_ib[i] = apply_crop(ctx.crop, uv[i], ctx.out_size);
  }
  pred.box_center = Vec2(256, 256);
  LossSample gt;
  gt.pose = gt_pose;
  gt.kp2d_ib = pred.kp2d_ib;
  gt.kp2d_ib[KeypointId::kSeat].x() += 25.6;
  gt.box_center = Vec2(256.0 + 25.6, 256.0);

  const LossBreakdown b = loss_terms(pred, gt, ctx);
  const double expected = 0.25 / 3.0 + 0.25 / 3.0 + 2.0 / 162.0 + 0.5 * 0.04 / 33.0 +
                          0.01 / 22.0 + 0.2 * 0.005;
  const double err = std::abs(b.total - expected);

  oracle::SuiteOptions opts;
  const auto grads = oracle::gradient_suite(opts);
  t.record(6, "loss and gradients", err <= 1e-10 && grads.ok(),
           "fixture total " + fmt(b.total) + " (error " + fmt(err) + "), gradients " +
               std::to_string(grads.passed) + "/" + std::to_string(grads.total) +
               " within 1e-4" +
               (grads.first_failure.empty() ? "" : ", first failure " + grads.first_failure));
}

// [7] Dataset sizes at full scale and byte-level reproducibility.
void dataset_scale(Tally& t, const Workspace& ws) {
  const fs::path big = ws.dir / "full.jsonl";
  const Timed g = run("generate --config " + quote(kConfigs / "full.json") + " --out " +
                          quote(big) + " --threads 2",
                      ws.dir / "full_gen.log");
  std::size_t total = 0;
  std::size_t train = 0;
  std::size_t val = 0;
  std::map<std::string, std::size_t> per_template;
  if (g.code == 0) {
    std::ifstream in(big);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      ++total;
      (j.at("split").get<std::string>() == "train" ? train : val) += 1;
      ++per_template[j.at("template_id").get<std::string>()];
    }
  }
  fs::remove(big);
  bool balanced = per_template.size() == 23;
  for (const auto& [id, n] : per_template) balanced = balanced && n == 2500;
  const bool counts = total == 57500 && train == 43125 && val == 14375 && balanced;

  const fs::path again = ws.dir / "desk_again.jsonl";
  const Timed d = run("generate --config " + quote(kConfigs / "desk.json") + " --out " +
                          quote(again) + " --threads 3",
                      ws.dir / "desk_again.log");
  const bool identical = d.code == 0 && slurp(again) == slurp(ws.desk);

  t.record(7, "dataset scale and determinism", counts && identical,
           std::to_string(total) + " records (" + std::to_string(train) + " train / " +
               std::to_string(val) + " val) over " + std::to_string(per_template.size()) +
               " templates, repeat desk run " + (identical ? "byte-identical" : "differs"));
}

}  // namespace

int main() {
  Workspace ws;
  Tally t;
  const Timed gen = run("generate --config " + quote(kConfigs / "desk.json") + " --out " +
                            quote(ws.desk) + " --threads 1",
                        ws.dir / "desk_gen.log");
  const Timed gen_clean = run("generate --config " + quote(kConfigs / "desk_noise_free.json") +
                                  " --out " + quote(ws.clean) + " --threads 1",
                              ws.dir / "clean_gen.log");
  if (gen.code != 0 || gen_clean.code != 0) {
    std::cerr << "desk generation failed:\n"
              << slurp(ws.dir / "desk_gen.log") << slurp(ws.dir / "clean_gen.log");
    return 1;
  }

  perfect_oracle(t, ws);
  const FitRun clean = round_trip(t, ws);
  noise_sensitivity(t, ws, clean);
  iou_check(t);
  kinematics_check(t);
  loss_check(t);
  dataset_scale(t, ws);

  std::cout << (t.failures() == 0 ? "all criteria passed" : std::to_string(t.failures()) +
                                                                " criteria failed")
            << std::endl;
  return t.failures() == 0 ? 0 : 1;
}
