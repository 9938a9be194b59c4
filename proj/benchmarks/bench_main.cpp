#include <benchmark/benchmark.h>

#include <vector>

#include "rsq/data.hpp"
#include "rsq/hadamard.hpp"
#include "rsq/model.hpp"
#include "rsq/quantize.hpp"
#include "rsq/rng.hpp"

namespace {

using namespace rsq;

Matrix random_matrix(int rows, int cols, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.gaussian(0.0, stddev);
  return m;
}

Matrix bench_hessian(int d_in, std::uint64_t seed) {
  HessianAccumulator acc(d_in);
  acc.accumulate_rows(random_matrix(4 * d_in, d_in, seed), std::vector<double>(4 * d_in, 1.0));
  return acc.finalize().h;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul_nt(a, b));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256)->Complexity();

void BM_Hadamard(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(hadamard_matrix(dim, 7));
  }
}
BENCHMARK(BM_Hadamard)->RangeMultiplier(4)->Range(16, 256);

void BM_HessianAccumulate(benchmark::State& state) {
  const int d_in = static_cast<int>(state.range(0));
  const Matrix x = random_matrix(128, d_in, 3);
  std::vector<double> r(128);
  Rng rng(4);
  for (double& v : r) v = 0.05 + rng.uniform();
  for (auto _ : state) {
    HessianAccumulator acc(d_in);
    acc.accumulate_rows(x, r);
    benchmark::DoNotOptimize(acc.raw());
  }
}
BENCHMARK(BM_HessianAccumulate)->RangeMultiplier(2)->Range(32, 256);

void BM_GptqNaive(benchmark::State& state) {
  const int d_in = static_cast<int>(state.range(0));
  const Matrix w = random_matrix(d_in, d_in, 5, 0.02);
  const Matrix h = bench_hessian(d_in, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gptq_quantize_weight(w, h, 3, 0));
  }
}
BENCHMARK(BM_GptqNaive)->RangeMultiplier(2)->Range(32, 256);

void BM_GptqBlocked(benchmark::State& state) {
  const int d_in = static_cast<int>(state.range(0));
  const Matrix w = random_matrix(d_in, d_in, 5, 0.02);
  const Matrix h = bench_hessian(d_in, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gptq_quantize_weight_blocked(w, h, 3, 0, 32));
  }
}
BENCHMARK(BM_GptqBlocked)->RangeMultiplier(2)->Range(32, 256);

void BM_RtnWeight(benchmark::State& state) {
  const int d_in = static_cast<int>(state.range(0));
  const Matrix w = random_matrix(d_in, d_in, 5, 0.02);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rtn_quantize_weight(w, 3, 0));
  }
}
BENCHMARK(BM_RtnWeight)->RangeMultiplier(2)->Range(32, 256);

void BM_Forward(benchmark::State& state) {
  ModelArch arch;
  arch.n_layers = 4;
  arch.d_model = 64;
  arch.n_heads = 4;
  arch.d_ff = 128;
  arch.vocab = 256;
  arch.max_seq = 256;
  const ModelContainer model = generate_model(arch, 1);
  const auto corpus = gen_corpus(256, 1, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, corpus[0]));
  }
}
BENCHMARK(BM_Forward)->RangeMultiplier(2)->Range(32, 128);

}  // namespace

BENCHMARK_MAIN();
