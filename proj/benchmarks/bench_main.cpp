#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "bikepose/bike_model.hpp"
#include "bikepose/metrics.hpp"
#include "bikepose/solver.hpp"
#include "bikepose/synth_data.hpp"

namespace bikepose {
namespace {

Dataset small_dataset(int samples) {
  DatasetConfig cfg;
  cfg.n_templates = 1;
  cfg.samples_per_template = samples;
  cfg.seed = 99;
  return generate_dataset(cfg, CanonicalTemplate::default_template(), Camera{}, 1);
}

void BM_Repose(benchmark::State& state) {
  const CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  std::mt19937_64 rng(1);
  const Pose8D pose = sample_pose(ParamDomain::standard(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(repose(tmpl.mean_keypoints, pose));
}
BENCHMARK(BM_Repose);

void BM_Iou3dExact(benchmark::State& state) {
  const CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  const OrientedBox3D box = bounding_box_3d(tmpl, tmpl.mean_keypoints);
  Pose8D a;
  Pose8D b;
  b.theta_y = 20.0;
  b.t = Vec3(0.2, 0.0, 0.3);
  const OrientedBox3D ba = repose_box(box, a);
  const OrientedBox3D bb = repose_box(box, b);
  for (auto _ : state) benchmark::DoNotOptimize(iou3d_exact(ba, bb));
}
BENCHMARK(BM_Iou3dExact);

void BM_Iou3dMonteCarlo(benchmark::State& state) {
  const CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  const OrientedBox3D box = bounding_box_3d(tmpl, tmpl.mean_keypoints);
  Pose8D b;
  b.theta_y = 20.0;
  const OrientedBox3D ba = repose_box(box, Pose8D{});
  const OrientedBox3D bb = repose_box(box, b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        iou3d_monte_carlo(ba, bb, static_cast<std::size_t>(state.range(0)), 7));
  }
}
BENCHMARK(BM_Iou3dMonteCarlo)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);

void BM_FitPose(benchmark::State& state) {
  const Dataset ds = small_dataset(16);
  std::vector<Observation> obs;
  for (const auto& r : ds.records) obs.push_back(Observation::from_record(r));
  SolverConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_pose(obs[i % obs.size()], ds.header.mean_template, cfg));
    ++i;
  }
}
BENCHMARK(BM_FitPose)->Unit(benchmark::kMillisecond);

void BM_GenerateDataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(small_dataset(static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateDataset)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace bikepose

BENCHMARK_MAIN();
