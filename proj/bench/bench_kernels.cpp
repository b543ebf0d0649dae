// Serial reference vs OpenMP kernel, pairwise. Thread count follows
// OMP_NUM_THREADS; on a single core the pairs measure parallel overhead only.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fuzzyseg/constraints.hpp"
#include "fuzzyseg/harness.hpp"
#include "fuzzyseg/oracle.hpp"
#include "fuzzyseg/refiner.hpp"
#include "fuzzyseg/superpixels.hpp"

using namespace fuzzyseg;

namespace {

LogitField random_field(GridShape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> v(s.size());
  for (auto& x : v) x = n(rng);
  return LogitField(s, std::move(v));
}

void BM_Softmax(benchmark::State& state, bool parallel) {
  const int side = static_cast<int>(state.range(0));
  const auto logits = random_field({side, side, 21}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(parallel ? softmax_field(logits) : serial::softmax_field(logits));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(logits.shape().pixels()));
}

void BM_ExactProb(benchmark::State& state, bool parallel) {
  const GridShape s{3, 4, 3};
  const auto probs = softmax_field(random_field(s, 2));
  const auto f = conjoin({build_neighborhood(3, 4), build_bbox_tight({0, 1, 2, 2, 1}, s)});
  for (auto _ : state) benchmark::DoNotOptimize(parallel ? exact_prob(f, probs) : serial::exact_prob(f, probs));
}

void BM_Slic(benchmark::State& state, bool parallel) {
  const auto samples = make_synthetic_dataset({1, 128, 128, 0.3, 0.6, 0.02, 3, 3});
  const auto cfg = default_slic_config(128, 128);
  for (auto _ : state) benchmark::DoNotOptimize(parallel ? slic(samples[0].image, cfg) : serial::slic(samples[0].image, cfg));
}

void BM_RefineBatch(benchmark::State& state, bool parallel) {
  const auto samples = make_synthetic_dataset({8, 32, 32, 0.3, 0.6, 0.02, 3, 4});
  const ConstraintOptions opts{{Family::Scribbles, Family::Bbox, Family::Background, Family::Neighborhood, Family::Fill}, {}};
  const auto formulas = build_dataset_formulas(samples, opts);
  std::vector<RefineJob> jobs;
  for (std::size_t k = 0; k < samples.size(); ++k) jobs.push_back({&samples[k].init, &formulas[k]});
  RefineConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.steps = 20;
  for (auto _ : state) benchmark::DoNotOptimize(parallel ? refine_batch(jobs, cfg) : serial::refine_batch(jobs, cfg));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Softmax, serial, false)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_Softmax, openmp, true)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_ExactProb, serial, false);
BENCHMARK_CAPTURE(BM_ExactProb, openmp, true);
BENCHMARK_CAPTURE(BM_Slic, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Slic, openmp, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RefineBatch, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RefineBatch, openmp, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
