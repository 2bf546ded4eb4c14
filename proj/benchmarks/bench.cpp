// Microbenchmarks for the hot paths: volume resampling, surface extraction,
// network forward/backward, and the evaluation metrics.
#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "mvrec/dataset.hpp"
#include "mvrec/losses.hpp"
#include "mvrec/marching_cubes.hpp"
#include "mvrec/metrics.hpp"
#include "mvrec/model.hpp"
#include "mvrec/rng.hpp"
#include "mvrec/voxelize.hpp"

using namespace mvrec;

namespace {

VoxelGrid sphere_grid(int res, double r) {
  VoxelGrid g(res);
  for (int z = 0; z < res; ++z) {
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        const Vec3 c{g.center(x), g.center(y), g.center(z)};
        g.set(x, y, z, c.norm() < r ? 1.0f : 0.0f);
      }
    }
  }
  return g;
}

VoxelGrid noise_grid(int res, std::uint64_t seed) {
  VoxelGrid g(res);
  Rng rng(seed);
  for (float& v : g.values) v = float(rng.uniform());
  return g;
}

CameraPose quarter_turn() {
  return CameraPose{Mat3::rotation_z(std::numbers::pi / 2), Vec3{0, 0, 0}};
}

void bm_resample_plan(benchmark::State& state) {
  const int res = int(state.range(0));
  for (auto _ : state) {
    ResamplePlan plan(res, 1.0, quarter_turn());
    benchmark::DoNotOptimize(plan.in_bounds_count());
  }
  state.SetItemsProcessed(state.iterations() * res * res * res);
}

void bm_resample_gather(benchmark::State& state) {
  const int res = int(state.range(0));
  const ResamplePlan plan(res, 1.0, quarter_turn());
  const VoxelGrid src = noise_grid(res, 1);
  std::vector<float> dst(src.values.size());
  for (auto _ : state) {
    plan.gather(src.values.data(), dst.data());
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * res * res * res);
}

void bm_resample_scatter(benchmark::State& state) {
  const int res = int(state.range(0));
  const ResamplePlan plan(res, 1.0, quarter_turn());
  const VoxelGrid src = noise_grid(res, 2);
  std::vector<float> dst(src.values.size());
  for (auto _ : state) {
    std::fill(dst.begin(), dst.end(), 0.0f);
    plan.scatter_add(src.values.data(), dst.data());
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetItemsProcessed(state.iterations() * res * res * res);
}

void bm_marching_cubes(benchmark::State& state) {
  const int res = int(state.range(0));
  const VoxelGrid g = sphere_grid(res, 0.6);
  for (auto _ : state) {
    TriangleMesh m = marching_cubes(g, 0.5);
    benchmark::DoNotOptimize(m.triangles.data());
  }
  state.SetItemsProcessed(state.iterations() * res * res * res);
}

void bm_voxelize(benchmark::State& state) {
  const int res = int(state.range(0));
  const TriangleMesh m = marching_cubes(sphere_grid(res, 0.6), 0.5);
  for (auto _ : state) {
    VoxelGrid g = voxelize(m, res, 1.0);
    benchmark::DoNotOptimize(g.values.data());
  }
}

void bm_forward(benchmark::State& state) {
  ArchDescriptor arch;
  arch.in_channels = 1;
  const PredictorParams params = init_params(arch, 1);
  const SceneSpec spec = generate_scene(3, {4, 8}, make_rig(1, 2.5, 0.35));
  const RenderedViews rv = render_views(spec, arch.img);
  const std::vector<double> planes =
      input_planes(arch, rv.silhouettes[0], rv.depths[0]);
  for (auto _ : state) {
    std::vector<VoxelGrid> out = forward(params, planes);
    benchmark::DoNotOptimize(out[0].values.data());
  }
}

void bm_backward_scene(benchmark::State& state) {
  const int n_views = int(state.range(0));
  ArchDescriptor arch;
  arch.in_channels = 1;
  const PredictorParams params = init_params(arch, 1);
  const CameraRig rig = make_rig(n_views, 2.5, 0.35);
  const SceneSpec spec = generate_scene(3, {4, 8}, rig);
  const RenderedViews rv = render_views(spec, arch.img);
  const std::vector<VoxelGrid> gts = ground_truth_grids(spec, arch.res);
  std::vector<std::vector<double>> planes;
  for (int v = 0; v < n_views; ++v) {
    planes.push_back(input_planes(arch, rv.silhouettes[v], rv.depths[v]));
  }
  LossConfig cfg;
  const MvcPlans plans(rig, arch.res, 1.0);
  for (auto _ : state) {
    SceneGradient sg = backward(params, planes, gts, rig, cfg, &plans);
    benchmark::DoNotOptimize(sg.grad.data());
  }
}

void bm_wbce(benchmark::State& state) {
  const int res = int(state.range(0));
  const VoxelGrid pred = noise_grid(res, 3);
  VoxelGrid gt = noise_grid(res, 4);
  for (float& v : gt.values) v = v < 0.3f ? 1.0f : 0.0f;
  LossConfig cfg;
  cfg.gamma = 0.7;
  for (auto _ : state) {
    LossTerms t = l3d({pred}, {gt}, cfg);
    benchmark::DoNotOptimize(t.value);
  }
  state.SetItemsProcessed(state.iterations() * res * res * res);
}

void bm_mvc_pair(benchmark::State& state) {
  const int res = int(state.range(0));
  const CameraRig rig = make_rig(2, 2.5, 0.35);
  const std::vector<VoxelGrid> pred{noise_grid(res, 5), noise_grid(res, 6)};
  const MvcPlans plans(rig, res, 1.0);
  LossConfig cfg;
  for (auto _ : state) {
    LossTerms t = lmvc(pred, rig, cfg, &plans);
    benchmark::DoNotOptimize(t.value);
  }
}

void bm_kdtree_query(benchmark::State& state) {
  const int n = int(state.range(0));
  Rng rng(7);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) {
    p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  const KdTree tree(pts);
  Rng qr(8);
  for (auto _ : state) {
    const Vec3 q{qr.uniform(-1, 1), qr.uniform(-1, 1), qr.uniform(-1, 1)};
    benchmark::DoNotOptimize(tree.nearest(q).second);
  }
}

void bm_chamfer(benchmark::State& state) {
  const int n = int(state.range(0));
  const TriangleMesh m = marching_cubes(sphere_grid(32, 0.6), 0.5);
  const std::vector<Vec3> a = mesh_to_points(m, n, 1);
  const std::vector<Vec3> b = mesh_to_points(m, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chamfer(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2 * n);
}

BENCHMARK(bm_resample_plan)->Arg(32);
BENCHMARK(bm_resample_gather)->Arg(32)->Arg(64);
BENCHMARK(bm_resample_scatter)->Arg(32)->Arg(64);
BENCHMARK(bm_marching_cubes)->Arg(32)->Arg(64);
BENCHMARK(bm_voxelize)->Arg(16)->Arg(32);
BENCHMARK(bm_forward);
BENCHMARK(bm_backward_scene)->Arg(2)->Arg(6);
BENCHMARK(bm_wbce)->Arg(32);
BENCHMARK(bm_mvc_pair)->Arg(32);
BENCHMARK(bm_kdtree_query)->Arg(1000)->Arg(20000);
BENCHMARK(bm_chamfer)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
