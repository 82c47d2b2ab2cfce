// Throughput of the core kernels. The nn_search cases use procedural rasters,
// so the largest ones never exist in memory.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dsmreg/icp.h"
#include "dsmreg/motion_averaging.h"
#include "dsmreg/nn_grid.h"
#include "dsmreg/raster.h"
#include "dsmreg/synth.h"

namespace dsmreg {
namespace {

GeoTransform unit_gt() {
  GeoTransform gt;
  gt.x_scale = 1.0;
  gt.y_scale = -1.0;
  return gt;
}

double wavy(std::int64_t u, std::int64_t v) {
  return 20.0 * std::sin(0.05 * static_cast<double>(u)) * std::cos(0.07 * static_cast<double>(v));
}

// Cost per query should stay flat as the raster grows.
void BM_NnSearch(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  const DsmGrid grid = make_procedural_grid(side, side, unit_gt(), kDefaultNodata, wavy);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(1.0, static_cast<double>(side - 2));
  std::uniform_real_distribution<double> dz(-2.0, 2.0);
  std::vector<Point3> queries;
  for (int k = 0; k < 1024; ++k) {
    const double u = pos(rng), v = pos(rng);
    Point3 q = uv_to_world(u, v, grid.geotransform());
    q.z() = wavy(std::llround(u), std::llround(v)) + dz(rng);
    queries.push_back(q);
  }
  std::size_t k = 0;
  std::int64_t scanned = 0;
  for (auto _ : state) {
    const NnResult r = find_nearest(queries[k++ % queries.size()], grid);
    scanned += r.candidates_scanned;
    benchmark::DoNotOptimize(r);
  }
  state.counters["pixels"] = static_cast<double>(grid.pixel_count());
  state.counters["candidates"] = benchmark::Counter(static_cast<double>(scanned), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_NnSearch)->RangeMultiplier(10)->Range(100, 100000);

void BM_DsmIcp(benchmark::State& state) {
  const DsmGrid ref = make_terrain({state.range(0), state.range(0), 1.0, 200.0, 0.7, 4});
  SplitMix64 rng(9);
  const Point3 center = Point3::Zero();
  const RigidTransform applied = random_perturbation(rng, {1.0, 2.0, 2.0, 0.5}, 1.0, center);
  const Lattice lattice{ref.geotransform(), ref.width(), ref.height()};
  const DsmGrid moving = apply_pose(ref, applied, lattice);
  IcpParams params;
  for (auto _ : state) benchmark::DoNotOptimize(dsm_icp(moving, ref, params));
}
BENCHMARK(BM_DsmIcp)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

SceneGraph noisy_grid_graph(int side) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(side));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  const int n = side * side;
  std::vector<RigidTransform> globals;
  for (int k = 0; k < n; ++k) {
    globals.push_back(RigidTransform::from_axis_angle(Eigen::Vector3d(nd(rng), nd(rng), nd(rng)).normalized(),
                                                      k == 0 ? 0.0 : 3.0 * unit(rng),
                                                      Eigen::Vector3d(nd(rng), nd(rng), nd(rng)) * 50.0));
  }
  SceneGraph g;
  for (int k = 0; k < n; ++k) g.vertices.push_back({k, {}});
  auto add = [&](int i, int j) {
    SceneEdge e;
    e.i = i;
    e.j = j;
    const RigidTransform noise = RigidTransform::from_axis_angle(
        Eigen::Vector3d(nd(rng), nd(rng), nd(rng)).normalized(), 0.02 * unit(rng),
        Eigen::Vector3d(nd(rng), nd(rng), nd(rng)));
    e.relative = noise * globals[i].inverse() * globals[j];
    e.overlap = 1.0;
    e.weight = unit(rng);
    g.edges.push_back(e);
  };
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      if (c + 1 < side) add(r * side + c, r * side + c + 1);
      if (r + 1 < side) add(r * side + c, (r + 1) * side + c);
    }
  }
  return g;
}

void BM_MotionAverage(benchmark::State& state) {
  const SceneGraph g = noisy_grid_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(motion_average(g));
  state.SetComplexityN(g.size());
}
BENCHMARK(BM_MotionAverage)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond)->Complexity();

void BM_GreedyMst(benchmark::State& state) {
  const SceneGraph g = noisy_grid_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(greedy_mst_solve(g));
  state.SetComplexityN(g.size());
}
BENCHMARK(BM_GreedyMst)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond)->Complexity();

}  // namespace
}  // namespace dsmreg

BENCHMARK_MAIN();
