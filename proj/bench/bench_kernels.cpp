// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to compare scaling.

#include <random>

#include <benchmark/benchmark.h>

#include "psyseg/hierarchy.hpp"
#include "psyseg/kernels.hpp"
#include "psyseg/slic.hpp"
#include "psyseg/synthetic.hpp"

using namespace psyseg;
using namespace psyseg::kernels;

namespace {

PointMatrix points(int n, int d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  PointMatrix p(n, d);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
  return p;
}

template <bool Parallel>
void BM_PairwiseDistances(benchmark::State& state) {
  const auto p = points(static_cast<int>(state.range(0)), 16);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? parallel::pairwise_distances(p) : serial::pairwise_distances(p));
}

template <bool Parallel>
void BM_Knn(benchmark::State& state) {
  const auto p = points(static_cast<int>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(Parallel ? parallel::knn(p, 2) : serial::knn(p, 2));
}

template <bool Parallel>
void BM_AssignNearest(benchmark::State& state) {
  const auto p = points(static_cast<int>(state.range(0)), 16);
  const auto c = points(8, 16);
  std::vector<int> a(p.rows());
  std::vector<double> d(p.rows());
  for (auto _ : state) {
    if (Parallel)
      parallel::assign_nearest(p, c, a, d);
    else
      serial::assign_nearest(p, c, a, d);
    benchmark::DoNotOptimize(a.data());
  }
}

template <bool Parallel>
void BM_ClusterDistanceSums(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto dist = serial::pairwise_distances(points(n, 16));
  std::vector<int> a(n);
  for (int i = 0; i < n; ++i) a[i] = i % 5;
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? parallel::cluster_distance_sums(dist, a, 5)
                                      : serial::cluster_distance_sums(dist, a, 5));
}

template <bool Parallel>
void BM_Slic(benchmark::State& state) {
  const auto img = imaging::generate_synthetic(imaging::SyntheticSpec::desk_scale()).image;
  imaging::SlicParams p;
  p.parallel = Parallel;
  for (auto _ : state) benchmark::DoNotOptimize(imaging::slic(img, p));
  state.SetLabel("600x1200, 300 patches");
}

template <bool Parallel>
void BM_Silhouette(benchmark::State& state) {
  const auto p = points(static_cast<int>(state.range(0)), 16);
  std::vector<int> a(p.rows());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<int>(i % 4);
  for (auto _ : state) benchmark::DoNotOptimize(hierarchy::silhouette(p, a, Parallel));
}

}  // namespace

BENCHMARK(BM_PairwiseDistances<false>)->Arg(300)->Arg(1000);
BENCHMARK(BM_PairwiseDistances<true>)->Arg(300)->Arg(1000);
BENCHMARK(BM_Knn<false>)->Arg(300)->Arg(1000);
BENCHMARK(BM_Knn<true>)->Arg(300)->Arg(1000);
BENCHMARK(BM_AssignNearest<false>)->Arg(10000);
BENCHMARK(BM_AssignNearest<true>)->Arg(10000);
BENCHMARK(BM_ClusterDistanceSums<false>)->Arg(1000);
BENCHMARK(BM_ClusterDistanceSums<true>)->Arg(1000);
BENCHMARK(BM_Silhouette<false>)->Arg(300)->Arg(1000);
BENCHMARK(BM_Silhouette<true>)->Arg(300)->Arg(1000);
BENCHMARK(BM_Slic<false>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Slic<true>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
