#include <benchmark/benchmark.h>

#include <random>

#include "scanflow/problems.hpp"
#include "scanflow/quadrature_opt.hpp"
#include "scanflow/segmentation.hpp"
#include "scanflow/stokes.hpp"

using namespace scanflow;

namespace {

void BM_Mosaic(benchmark::State& state) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::array<double, 4>> vals(1024);
  for (auto& v : vals) v = {u(rng), u(rng), u(rng), u(rng)};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mosaic_element(vals[i++ % vals.size()]));
}
BENCHMARK(BM_Mosaic);

// Immersed mesh of the disk on 16x16, by octree depth.
void BM_ImmersedDisk(benchmark::State& state) {
  const HierarchicalMesh2 mesh(RectMesh2::uniform({{0, 0}, {1, 1}}, {16, 16}));
  const auto f = disk_level_set({});
  for (auto _ : state) benchmark::DoNotOptimize(build_immersed_mesh(f, mesh, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_ImmersedDisk)->DenseRange(2, 10, 2)->Unit(benchmark::kMillisecond);

void BM_OptimizeCircle(benchmark::State& state) {
  const Box2 unit{{0, 0}, {1, 1}};
  auto f = [](const Point2& x) { return x[0] * x[0] + x[1] * x[1] - 0.16; };
  const Partition p = trim_element(sample_lattice(f, 3, unit), 3, unit);
  StoppingRule stop;
  stop.max_points = 112;
  for (auto _ : state) benchmark::DoNotOptimize(optimize(p, unit, 2, stop, MarkingStrategy::SubCell));
}
BENCHMARK(BM_OptimizeCircle)->Unit(benchmark::kMillisecond);

void BM_SmoothScan(benchmark::State& state) {
  const int n = 64;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * n);
  for (auto& x : v) x = u(rng);
  const auto g = GrayscaleGrid::from_values({n, n}, v);
  auto space = std::make_shared<const SplineSpace2>(HierarchicalMesh2(RectMesh2::uniform(g.box(), {16, 16})), 2);
  for (auto _ : state) benchmark::DoNotOptimize(smooth(g, space, 0.5));
}
BENCHMARK(BM_SmoothScan)->Unit(benchmark::kMillisecond);

// Assemble and solve the disk problem on n x n, degree k.
void BM_StokesDisk(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0)), k = static_cast<int>(state.range(1));
  auto space = std::make_shared<const SplineSpace2>(HierarchicalMesh2(RectMesh2::uniform({{0, 0}, {1, 1}}, {n, n})), k);
  const DiskGeometry g;
  const ImmersedMesh mesh = build_immersed_mesh(disk_level_set(g), space->mesh(), 2);
  const StokesQuadrature quad = build_quadrature(mesh, k);
  const StokesProblem problem = manufactured_disk_problem(g);
  for (auto _ : state) benchmark::DoNotOptimize(solve_stokes(problem, space, mesh, quad, {}));
  state.counters["ndof"] = static_cast<double>(make_discretization(space, mesh, problem).size());
}
BENCHMARK(BM_StokesDisk)->Args({16, 1})->Args({32, 1})->Args({16, 2})->Args({32, 2})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
