#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "fracbench/drr.hpp"
#include "fracbench/evaluation.hpp"
#include "fracbench/metrics.hpp"
#include "fracbench/phantom.hpp"
#include "fracbench/ranking.hpp"
#include "fracbench/rng.hpp"

using namespace fracbench;

namespace {

struct Case3D {
  Phantom phantom;
  LabelVolume pred;
};

// Fractured phantom with an isotropic grid of n^3 cells spanning 256 mm, and a
// dilated prediction so every fragment goes through the distance path.
const Case3D& phantom_case(int n) {
  static std::map<int, Case3D> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    PhantomSpec spec = PhantomSpec::standard({n, n, n}, {256.0 / n, 256.0 / n, 256.0 / n});
    spec.seed = 1;
    for (BoneSpec& b : spec.bones) b.random_planes = 2;
    Case3D c;
    c.phantom = generate_phantom(spec);
    c.pred = perturb(c.phantom.labels, PerturbationSpec{{DilateOp{1}}, 0});
    it = cache.emplace(n, std::move(c)).first;
  }
  return it->second;
}

void BM_ExtractSurface(benchmark::State& state) {
  const Case3D& c = phantom_case(static_cast<int>(state.range(0)));
  const BinaryMask m = anatomy_mask(c.phantom.labels, Anatomy::LeftHip);
  for (auto _ : state) benchmark::DoNotOptimize(extract_surface(m));
}
BENCHMARK(BM_ExtractSurface)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SurfaceDistances(benchmark::State& state) {
  const Case3D& c = phantom_case(static_cast<int>(state.range(0)));
  const SurfacePointSet a = extract_surface(anatomy_mask(c.phantom.labels, Anatomy::Sacrum));
  const SurfacePointSet b = extract_surface(anatomy_mask(c.pred, Anatomy::Sacrum));
  for (auto _ : state) benchmark::DoNotOptimize(surface_distances(a, b));
  state.counters["points"] = static_cast<double>(a.size() + b.size());
}
BENCHMARK(BM_SurfaceDistances)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EvaluateCase3D(benchmark::State& state) {
  const Case3D& c = phantom_case(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_case(c.phantom.labels, c.pred));
}
BENCHMARK(BM_EvaluateCase3D)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EvaluateCase2D(benchmark::State& state) {
  const Case3D& c = phantom_case(128);
  SimulationConfig config;
  config.noise.photon_noise = false;
  const SimulationResult r = simulate_case(c.phantom.ct, c.phantom.labels, config, 3);
  const SimulationResult shifted = simulate_case(c.phantom.ct, c.pred, config, 3);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_case(r.mask, shifted.mask));
}
BENCHMARK(BM_EvaluateCase2D)->Unit(benchmark::kMillisecond);

void BM_ForwardProject(benchmark::State& state) {
  const Case3D& c = phantom_case(static_cast<int>(state.range(0)));
  const MaterialVolume m = decompose_materials(c.phantom.ct);
  std::mt19937_64 rng(2);
  PoseOptions pose;
  pose.resolution = 224;
  const CameraGeometry cam =
      sample_camera_pose(rng, pose, 0.5 * (m.grid.lower_corner() + m.grid.upper_corner()));
  const ProjectionOptions options{0.0, state.range(1) ? RayIntegrator::Exact : RayIntegrator::FixedStep, 1};
  const Spectrum spectrum = Spectrum::default_tube();
  const AttenuationTable table = AttenuationTable::standard();
  for (auto _ : state) benchmark::DoNotOptimize(forward_project(m, spectrum, table, cam, options));
}
BENCHMARK(BM_ForwardProject)->Args({128, 0})->Args({128, 1})->Unit(benchmark::kMillisecond);

void BM_SimulateView(benchmark::State& state) {
  const Case3D& c = phantom_case(static_cast<int>(state.range(0)));
  const MaterialVolume m = decompose_materials(c.phantom.ct);
  const SimulationConfig config;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_case(m, c.phantom.labels, config, seed++));
}
BENCHMARK(BM_SimulateView)->Arg(256)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_Bootstrap(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TeamResult> study(11);
  for (std::size_t t = 0; t < study.size(); ++t) {
    study[t].team = "team" + std::to_string(t);
    for (int c = 0; c < 100; ++c) {
      CaseMetrics m;
      m.iou_f = m.iou_a = 0.5 + 0.04 * static_cast<double>(t) * u(rng);
      m.hd95_f = m.hd95_a = 50.0 * u(rng);
      m.assd_f = m.assd_a = 10.0 * u(rng);
      study[t].per_case.push_back(m);
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_stability(study, 1000, 7));
}
BENCHMARK(BM_Bootstrap)->Unit(benchmark::kMillisecond);

void BM_WilcoxonExact(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.2, 1.0);
  std::vector<double> x(kWilcoxonExactLimit), y(kWilcoxonExactLimit, 0.0);
  for (double& v : x) v = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_one_sided(x, y));
}
BENCHMARK(BM_WilcoxonExact);

}  // namespace
BENCHMARK_MAIN();
