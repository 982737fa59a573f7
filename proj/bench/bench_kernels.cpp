// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts, plus batch
// scoring of a test split. Thread count follows OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <random>

#include "vagg/aggregator.hpp"
#include "vagg/evaluation.hpp"
#include "vagg/kernels.hpp"
#include "vagg/synthdata.hpp"

namespace {

using namespace vagg;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

template <Matrix (*Fn)(const Matrix&, const Matrix&)>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Matrix (*Fn)(const Matrix&)>
void bm_softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a));
}

template <Matrix (*Fn)(const Matrix&, std::span<const double>, std::span<const double>, double)>
void bm_layer_norm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 4);
  const std::vector<double> gain(n, 1.0), bias(n, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, gain, bias, 1e-5));
}

void bm_score_split(benchmark::State& state) {
  GenConfig g;
  g.num_subjects = static_cast<std::size_t>(state.range(0));
  g.seed = 1;
  const Dataset data = generate(g);
  const EncoderConfig enc = EncoderConfig::make(g.dim, 4, 2);
  const EncoderParams params = init_params(enc, 1);
  const std::vector<Scorer> scorers{
      {"transformer", [&](const TokenSet& ts, std::uint64_t) { return score_v2s(params, enc, ts); }}};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_v2s(data, scorers));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

}  // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<kernels::parallel::matmul_nt>)->Name("matmul_nt/parallel")->Arg(64)->Arg(256);
BENCHMARK(bm_softmax<kernels::serial::softmax_rows>)->Name("softmax_rows/serial")->Arg(512);
BENCHMARK(bm_softmax<kernels::parallel::softmax_rows>)->Name("softmax_rows/parallel")->Arg(512);
BENCHMARK(bm_layer_norm<kernels::serial::layer_norm>)->Name("layer_norm/serial")->Arg(512);
BENCHMARK(bm_layer_norm<kernels::parallel::layer_norm>)->Name("layer_norm/parallel")->Arg(512);
BENCHMARK(bm_score_split)->Name("evaluate_v2s/transformer")->Arg(50)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
