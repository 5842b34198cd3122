#include <random>

#include <benchmark/benchmark.h>

#include "reactkd/distill.hpp"
#include "reactkd/gromov_wasserstein.hpp"
#include "reactkd/losses.hpp"
#include "reactkd/morphology.hpp"
#include "reactkd/nets.hpp"
#include "reactkd/region_graph.hpp"

using namespace reactkd;

namespace {

Eigen::MatrixXd random_similarity(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = i == j ? 1.0 : u(rng);
  return s;
}

FeatureVolume random_volume(int channels, Dims d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  FeatureVolume f(channels, d);
  for (auto& v : f.data) v = n(rng);
  return f;
}

}  // namespace

static void BM_GwDiscrepancy(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd ss = random_similarity(n, rng), st = random_similarity(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gw_discrepancy(ss, st).cost);
}
BENCHMARK(BM_GwDiscrepancy)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMicrosecond);

static void BM_RgdLoss(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Eigen::MatrixXd fs(4, 8), ft(4, 8);
  for (Eigen::Index i = 0; i < fs.size(); ++i) {
    fs.data()[i] = n(rng);
    ft.data()[i] = n(rng);
  }
  const RegionGraph gt = build_graph(std::vector<Eigen::VectorXd>{ft.row(0), ft.row(1), ft.row(2), ft.row(3)});
  for (auto _ : state) benchmark::DoNotOptimize(rgd_loss(fs, ft, gt.edges, RgdWeights{}, GwConfig{}).value);
}
BENCHMARK(BM_RgdLoss)->Unit(benchmark::kMicrosecond);

static void BM_RegionGraph(benchmark::State& state) {
  const SyntheticCase c = synthesize_case(3, 0);
  const FeatureVolume f = random_volume(8, c.mask.dims, 3);
  for (auto _ : state) benchmark::DoNotOptimize(region_graph(f, c.mask).edges.sum());
}
BENCHMARK(BM_RegionGraph)->Unit(benchmark::kMicrosecond);

static void BM_RefineMask(benchmark::State& state) {
  const SyntheticCase c = synthesize_case(4, 0);
  for (auto _ : state) benchmark::DoNotOptimize(refine_mask(c.mask).labels.data());
}
BENCHMARK(BM_RefineMask)->Unit(benchmark::kMillisecond);

static void BM_Conv3d(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const FeatureVolume f = random_volume(ch, {16, 24, 24}, 5);
  const Conv3d conv = Conv3d::random(ch, ch, 3, 1, 6, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d(f, conv).data.data());
}
BENCHMARK(BM_Conv3d)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_WindowAttention(benchmark::State& state) {
  const bool shifted = state.range(0) != 0;
  const WindowShape w{2, 4, 4};
  const Dims grid{4, 8, 8};
  const AttentionParams p = AttentionParams::random(16, 16, 32, w, 4, 7, 0.2);
  const Eigen::MatrixXd tokens = to_tokens(random_volume(16, grid, 8));
  for (auto _ : state) benchmark::DoNotOptimize(wmsa_forward(tokens, grid, p, shifted).sum());
}
BENCHMARK(BM_WindowAttention)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_SynthesizeCase(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_case(9, i++).grade);
}
BENCHMARK(BM_SynthesizeCase)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
