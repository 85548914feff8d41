#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "bikepose/cli/commands.hpp"
#include "bikepose/cli/manifest.hpp"

namespace {

using namespace bikepose;
using namespace bikepose::cli;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bikepose: synthetic 8D bicycle pose data, fitting and evaluation"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);

  GenerateOptions gen;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Write a synthetic annotation file");
  generate->add_option("--config", gen.config, "JSON generator config")->check(CLI::ExistingFile);
  auto* gen_seed_opt = generate->add_option("--seed", gen_seed, "Override the config seed");
  generate->add_option("--out", gen.out, "Annotation file to write")->required();
  generate->add_option("--threads", gen.threads, "Worker threads")->check(CLI::PositiveNumber);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit 8D poses to the keypoints of an annotation file");
  fit_cmd->add_option("--data", fit.data, "Annotation file")->required();
  fit_cmd->add_option("--out", fit.out, "Prediction file to write")->required();
  fit_cmd->add_option("--noise-px", fit.noise_px, "Gaussian pixel noise added to observations");
  fit_cmd->add_option("--seed", fit.seed, "Noise seed");
  fit_cmd->add_flag("--fit-shape", fit.fit_shape, "Also fit keypoint shape residuals");
  fit_cmd->add_option("--yaw-starts", fit.yaw_starts, "Yaw seeds per sample")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--threads", fit.threads, "Worker threads")->check(CLI::PositiveNumber);

  EvalOptions ev;
  std::string iou_mode = "exact";
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--data", ev.data, "Annotation file")->required();
  eval->add_option("--pred", ev.predictions, "Prediction file")->required();
  eval->add_option("--out", ev.out, "Line-delimited JSON report")->capture_default_str();
  eval->add_option("--iou-mode", iou_mode, "3D IoU computation")->check(CLI::IsMember({"exact", "mc"}));
  eval->add_option("--mc-samples", ev.mc_samples, "Monte-Carlo IoU samples per box");
  eval->add_option("--seed", ev.seed, "Monte-Carlo IoU seed");
  eval->add_flag("--per-keypoint-2d", ev.per_keypoint_2d, "2D AR over keypoints instead of samples");

  RenderOptions rd;
  auto* render = app.add_subcommand("render", "Draw the skeleton of one sample");
  render->add_option("--data", rd.data, "Annotation file")->required();
  render->add_option("--pred", rd.predictions, "Render this prediction instead of ground truth");
  render->add_option("--sample", rd.sample_id, "Sample id")->required();
  render->add_option("--out", rd.out, "Overlay image (views go to <stem>_views<ext>)")->required();
  render->add_option("--background", rd.background, "Background image")->check(CLI::ExistingFile);

  OracleCheckOptions oc;
  auto* check = app.add_subcommand("oracle-check", "Run the embedded oracle suites");
  check->add_option("--seed", oc.seed, "Suite seed")->capture_default_str();
  check->add_option("--iou-tol", oc.iou_tol, "Exact vs Monte-Carlo IoU tolerance")->capture_default_str();
  check->add_option("--out", oc.out, "Summary file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) {
      if (*gen_seed_opt) gen.seed = gen_seed;
      return run_generate(gen, std::cout);
    }
    if (*fit_cmd) return run_fit(fit, std::cout);
    if (*eval) {
      ev.iou_mode = iou_mode == "mc" ? IouMode::kMonteCarlo : IouMode::kExact;
      return run_eval(ev, std::cout);
    }
    if (*render) return run_render(rd, std::cout);
    if (*check) return run_oracle_check(oc, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}
