#include "bikepose/cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "bikepose/cli/manifest.hpp"
#include "bikepose/cli/render.hpp"
#include "bikepose/error.hpp"
#include "bikepose/oracle/oracles.hpp"
#include "bikepose/parallel.hpp"
#include "bikepose/records.hpp"

namespace bikepose::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::uint32_t kNoiseStream = 0x6e6f6973;  // "nois"

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void require_out(const fs::path& out) {
  if (out.empty()) throw UsageError("--out is required");
}

void require_threads(int threads) {
  if (threads < 1) throw UsageError("--threads must be >= 1");
}

RunManifest start_manifest(const char* command, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.seed = seed;
  m.tool_version = tool_version();
  return m;
}

void finish_manifest(RunManifest& m, const Stopwatch& sw, const fs::path& out) {
  m.duration_s = sw.seconds();
  write_manifest(m, out);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  return dynamic_cast<const UsageError*>(&e) != nullptr ? kExitUsage : kExitData;
}

Observation noisy_observation(const AnnotationRecord& rec, double noise_px, std::uint64_t seed,
                              std::size_t index) {
  Observation obs = Observation::from_record(rec);
  if (noise_px <= 0.0) return obs;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    kNoiseStream, static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, noise_px);
  for (auto& kp : obs.keypoints) {
    if (!kp) continue;
    const double du = noise(rng);
    const double dv = noise(rng);
    *kp += Vec2(du, dv);
  }
  obs.noise_sigma_hint = noise_px;
  return obs;
}

int run_generate(const GenerateOptions& opts, std::ostream& log) {
  const Stopwatch sw;
  require_out(opts.out);
  require_threads(opts.threads);

  GenerateConfig gc;
  CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  try {
    if (!opts.config.empty()) gc = load_generate_config(opts.config);
    if (opts.seed) gc.dataset.seed = *opts.seed;
    if (!gc.template_path.empty()) tmpl = load_template(gc.template_path);
    gc.dataset.validate();
    gc.camera.validate();
    tmpl.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const DatasetHeader header = dataset_header(gc.dataset, tmpl, gc.camera);
  AnnotationWriter writer(opts.out, header);
  std::size_t train = 0;
  std::size_t val = 0;
  generate_dataset(
      gc.dataset, tmpl, gc.camera,
      [&](AnnotationRecord&& rec) {
        (rec.split == Split::kTrain ? train : val) += 1;
        writer.write(rec);
      },
      opts.threads);
  writer.close();

  log << (train + val) << " records (" << train << " train / " << val << " val) -> "
      << opts.out.string() << '\n';

  RunManifest m = start_manifest("generate", gc.dataset.seed);
  m.set("config", opts.config.string());
  m.set("n_templates", std::to_string(gc.dataset.n_templates));
  m.set("samples_per_template", std::to_string(gc.dataset.samples_per_template));
  m.set("train_fraction", fmt(gc.dataset.train_fraction));
  m.set("residual_sigma", fmt(gc.dataset.residual_sigma));
  m.set("residual_bound", fmt(gc.dataset.residual_bound));
  m.set("occlusion_dropout", fmt(gc.dataset.occlusion_dropout));
  m.set("max_retries", std::to_string(gc.dataset.max_retries));
  m.set("template", gc.template_path.empty() ? "default" : gc.template_path.string());
  m.set("threads", std::to_string(opts.threads));
  m.set("records", std::to_string(train + val));
  m.set("train", std::to_string(train));
  m.set("val", std::to_string(val));
  if (!opts.config.empty()) m.inputs.push_back(opts.config);
  m.outputs.push_back(opts.out);
  finish_manifest(m, sw, opts.out);
  return kExitOk;
}

int run_fit(const FitOptions& opts, std::ostream& log) {
  const Stopwatch sw;
  require_out(opts.out);
  require_threads(opts.threads);
  if (!(opts.noise_px >= 0.0)) throw UsageError("--noise-px must be >= 0");

  SolverConfig cfg;
  cfg.yaw_starts = opts.yaw_starts;
  cfg.fit_shape = opts.fit_shape;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const Dataset ds = read_records(opts.data);
  cfg.residual_bound = ds.header.residual_bound;
  const CanonicalTemplate& tmpl = ds.header.mean_template;

  std::vector<PredictionRecord> preds(ds.records.size());
  parallel_for(ds.records.size(), opts.threads, [&](std::size_t i) {
    const AnnotationRecord& rec = ds.records[i];
    PredictionRecord& p = preds[i];
    p.sample_id = rec.sample_id;
    try {
      const SolveResult r = fit_pose(noisy_observation(rec, opts.noise_px, opts.seed, i), tmpl, cfg);
      p.pose = r.pose;
      p.residuals = r.residuals;
      p.objective = r.objective;
      p.converged = r.converged;
      p.iterations = r.iterations_used;
    } catch (const Error& e) {
      p.error = e.what();
    }
  });
  write_predictions(opts.out, preds);

  std::size_t failed = 0;
  std::size_t converged = 0;
  double objective_sum = 0.0;
  for (const auto& p : preds) {
    if (p.failed()) {
      ++failed;
      continue;
    }
    if (p.converged) ++converged;
    objective_sum += p.objective;
  }
  const std::size_t fitted = preds.size() - failed;
  const double mean_objective = fitted > 0 ? objective_sum / static_cast<double>(fitted) : 0.0;
  log << preds.size() << " samples: " << converged << " converged, " << failed
      << " failed, mean objective " << mean_objective << " -> " << opts.out.string() << '\n';
  for (const auto& p : preds) {
    if (p.failed()) log << "  " << p.sample_id << ": " << p.error << '\n';
  }

  RunManifest m = start_manifest("fit", opts.seed);
  m.set("noise_px", fmt(opts.noise_px));
  m.set("fit_shape", opts.fit_shape ? "true" : "false");
  m.set("yaw_starts", std::to_string(cfg.yaw_starts));
  m.set("pedal_starts", std::to_string(cfg.pedal_starts));
  m.set("max_iterations", std::to_string(cfg.max_iterations));
  m.set("fd_step", fmt(cfg.fd_step));
  m.set("converge_tol", fmt(cfg.converge_tol));
  m.set("shape_ridge", fmt(cfg.shape_ridge));
  m.set("threads", std::to_string(opts.threads));
  m.set("samples", std::to_string(preds.size()));
  m.set("converged", std::to_string(converged));
  m.set("failed", std::to_string(failed));
  m.set("mean_objective", fmt(mean_objective));
  m.inputs.push_back(opts.data);
  m.outputs.push_back(opts.out);
  finish_manifest(m, sw, opts.out);
  return failed == 0 ? kExitOk : kExitData;
}

int run_eval(const EvalOptions& opts, std::ostream& log) {
  const Stopwatch sw;
  require_out(opts.out);
  if (opts.iou_mode == IouMode::kMonteCarlo && opts.mc_samples == 0) {
    throw UsageError("--mc-samples must be positive");
  }
  const Dataset ds = read_records(opts.data);
  const std::vector<PredictionRecord> preds = read_predictions(opts.predictions);

  ReportOptions ro;
  ro.iou.mode = opts.iou_mode;
  ro.iou.mc_samples = opts.mc_samples;
  ro.iou.seed = opts.seed;
  ro.per_keypoint_2d = opts.per_keypoint_2d;
  const MetricsReport report = build_report(ds, preds, ro);

  log << format_report_table(report);
  {
    std::ofstream out(opts.out);
    if (!out) throw Error("cannot open '" + opts.out.string() + "' for writing");
    out << format_report_jsonl(report);
  }

  RunManifest m = start_manifest("eval", opts.seed);
  m.set("iou_mode", opts.iou_mode == IouMode::kExact ? "exact" : "mc");
  m.set("mc_samples", std::to_string(opts.mc_samples));
  m.set("per_keypoint_2d", opts.per_keypoint_2d ? "true" : "false");
  m.inputs.push_back(opts.data);
  m.inputs.push_back(opts.predictions);
  m.outputs.push_back(opts.out);
  finish_manifest(m, sw, opts.out);
  return kExitOk;
}

int run_render(const RenderOptions& opts, std::ostream& log) {
  const Stopwatch sw;
  require_out(opts.out);
  if (opts.sample_id.empty()) throw UsageError("--sample is required");

  const Dataset ds = read_records(opts.data);
  const auto rec_it = std::find_if(ds.records.begin(), ds.records.end(),
                                   [&](const AnnotationRecord& r) { return r.sample_id == opts.sample_id; });
  if (rec_it == ds.records.end()) throw Error("unknown sample id '" + opts.sample_id + "'");

  Pose8D pose = rec_it->pose;
  ResidualSet residuals = rec_it->residuals;
  if (!opts.predictions.empty()) {
    const auto preds = read_predictions(opts.predictions);
    const auto p = std::find_if(preds.begin(), preds.end(),
                                [&](const PredictionRecord& r) { return r.sample_id == opts.sample_id; });
    if (p == preds.end()) throw Error("unknown sample id '" + opts.sample_id + "' in predictions");
    if (p->failed()) throw Error("prediction for '" + opts.sample_id + "' failed: " + p->error);
    pose = p->pose;
    residuals = p->residuals;
  }

  const KeypointSet3D posed = repose(
      canonical_keypoints(ds.header.mean_template, residuals, ds.header.residual_bound), pose);
  KeypointSet2D uv;
  try {
    uv = project_keypoints(rec_it->camera, posed);
  } catch (const BehindCameraError&) {
    for (auto& p : uv) p = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  }

  cv::Mat background;
  if (!opts.background.empty()) {
    background = cv::imread(opts.background.string(), cv::IMREAD_COLOR);
    if (background.empty()) throw Error("cannot read background image '" + opts.background.string() + "'");
  }
  const cv::Mat overlay = render_overlay(uv, background, rec_it->camera.width, rec_it->camera.height);
  const cv::Mat views = render_views(posed, pose.t);

  fs::path views_path = opts.out;
  views_path.replace_filename(opts.out.stem().string() + "_views" + opts.out.extension().string());
  if (!cv::imwrite(opts.out.string(), overlay)) throw Error("cannot write '" + opts.out.string() + "'");
  if (!cv::imwrite(views_path.string(), views)) throw Error("cannot write '" + views_path.string() + "'");
  log << "rendered " << opts.sample_id << " -> " << opts.out.string() << ", " << views_path.string() << '\n';

  RunManifest m = start_manifest("render", 0);
  m.set("sample_id", opts.sample_id);
  m.set("source", opts.predictions.empty() ? "ground_truth" : "predictions");
  m.inputs.push_back(opts.data);
  if (!opts.predictions.empty()) m.inputs.push_back(opts.predictions);
  if (!opts.background.empty()) m.inputs.push_back(opts.background);
  m.outputs.push_back(opts.out);
  m.outputs.push_back(views_path);
  finish_manifest(m, sw, opts.out);
  return kExitOk;
}

int run_oracle_check(const OracleCheckOptions& opts, std::ostream& log) {
  const Stopwatch sw;
  require_out(opts.out);
  if (!(opts.iou_tol > 0.0)) throw UsageError("--iou-tol must be positive");
  oracle::SuiteOptions so;
  so.seed = opts.seed;
  so.iou_tol = opts.iou_tol;
  const auto results = oracle::run_all(so);

  bool all_ok = true;
  std::ostringstream summary;
  for (const auto& r : results) {
    all_ok = all_ok && r.ok();
    log << (r.ok() ? "PASS " : "FAIL ") << r.name << ": " << r.passed << "/" << r.total << '\n';
    if (!r.ok()) log << "  first failure: " << r.first_failure << '\n';
    summary << r.name << '\t' << r.passed << '\t' << r.total << '\t' << r.first_failure << '\n';
  }
  {
    std::ofstream out(opts.out);
    if (!out) throw Error("cannot open '" + opts.out.string() + "' for writing");
    out << summary.str();
  }

  RunManifest m = start_manifest("oracle-check", opts.seed);
  m.set("iou_tol", fmt(opts.iou_tol));
  m.set("kinematics_draws", std::to_string(so.kinematics_draws));
  m.set("iou_pairs", std::to_string(so.iou_pairs));
  m.set("iou_mc_samples", std::to_string(so.iou_mc_samples));
  m.set("gradient_points", std::to_string(so.gradient_points));
  m.set("result", all_ok ? "pass" : "fail");
  m.outputs.push_back(opts.out);
  finish_manifest(m, sw, opts.out);
  return all_ok ? kExitOk : kExitCheckFailed;
}

}  // namespace bikepose::cli
