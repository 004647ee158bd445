#include <benchmark/benchmark.h>

#include <numeric>

#include "tsel/fixtures.hpp"
#include "tsel/metrics.hpp"
#include "tsel/proxy.hpp"
#include "tsel/random.hpp"
#include "tsel/rankers.hpp"
#include "tsel/taskemb.hpp"
#include "tsel/toylab.hpp"

using namespace tsel;

namespace {

std::vector<TaskId> ids(std::size_t n) {
  std::vector<TaskId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("s" + std::to_string(i));
  return out;
}

TransferTable random_table(std::size_t n) {
  Rng rng(1);
  std::vector<double> s(n);
  for (double& x : s) x = 100 * rng.uniform01();
  return TransferTable("bench", ids(n), {"T"}, {50.0}, s);
}

EmbeddedDataset blobs(std::size_t n, std::size_t dim, std::size_t classes) {
  Rng rng(2);
  EmbeddedDataset d{LabelKind::class_index, dim, classes, "s", "t", {}};
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddedExample e;
    e.label = static_cast<int>(i % classes);
    e.vector.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) e.vector[j] = rng.normal() + (j == i % classes ? 2.0 : 0.0);
    d.examples.push_back(std::move(e));
  }
  return d;
}

}  // namespace

static void BM_Ndcg(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto table = random_table(n);
  const Ranking r = rank_random(table.intermediates(), "T", 3);
  for (auto _ : state) benchmark::DoNotOptimize(ndcg(r, table));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ndcg)->Arg(42)->Arg(1000);

static void BM_ExpectedRandomRegret(benchmark::State& state) {
  const auto table = random_table(static_cast<std::size_t>(state.range(0)));
  const auto col = table.column(0);
  for (auto _ : state) benchmark::DoNotOptimize(expected_random_regret(col, 3));
}
BENCHMARK(BM_ExpectedRandomRegret)->Arg(42)->Arg(1000);

static void BM_RandomBaselineRow(benchmark::State& state) {
  const auto& fx = load_fixtures();
  for (auto _ : state) {
    benchmark::DoNotOptimize(random_baseline_row(fx.roberta, "RTE", static_cast<std::uint64_t>(state.range(0)), 0));
  }
}
BENCHMARK(BM_RandomBaselineRow)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_Rrf(benchmark::State& state) {
  const auto pool = ids(static_cast<std::size_t>(state.range(0)));
  std::vector<Ranking> in;
  for (std::uint64_t s = 0; s < 4; ++s) in.push_back(rank_random(pool, "T", s));
  for (auto _ : state) benchmark::DoNotOptimize(rrf_fuse(in));
}
BENCHMARK(BM_Rrf)->Arg(42)->Arg(1000);

static void BM_KnnCv(benchmark::State& state) {
  const auto d = blobs(static_cast<std::size_t>(state.range(0)), 16, 4);
  for (auto _ : state) benchmark::DoNotOptimize(knn_cv_score(d, CvConfig{}));
}
BENCHMARK(BM_KnnCv)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_LinearCv(benchmark::State& state) {
  const auto d = blobs(static_cast<std::size_t>(state.range(0)), 16, 4);
  for (auto _ : state) benchmark::DoNotOptimize(linear_cv_score(d, CvConfig{}));
}
BENCHMARK(BM_LinearCv)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_FimDiagonal(benchmark::State& state) {
  const auto d = blobs(1000, static_cast<std::size_t>(state.range(0)), 4);
  ProbeModel m = ProbeModel::zeros(4, d.dim);
  Rng rng(5);
  for (double& w : m.weights) w = 0.1 * rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(fim_diagonal(m, d));
}
BENCHMARK(BM_FimDiagonal)->Arg(8)->Arg(128)->Unit(benchmark::kMicrosecond);

static void BM_ToyLabBenchmark(benchmark::State& state) {
  ToyUniverseConfig u;
  u.domain_drift = 0.0;
  u.target_train_cap = 100;
  const auto methods = default_lab_methods();
  for (auto _ : state) benchmark::DoNotOptimize(run_benchmark(gen_universe(u), methods, ToyTrainConfig{}));
}
BENCHMARK(BM_ToyLabBenchmark)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK_MAIN();
