// Reference vs parallel kernels at desk-scale LSTM shapes.
#include <benchmark/benchmark.h>

#include <vector>

#include "condgen/model.hpp"
#include "condgen/nn/kernels.hpp"
#include "condgen/nn/tape.hpp"
#include "condgen/rng.hpp"

namespace {

using namespace condgen;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() - 0.5;
  return v;
}

// LSTM layer shape: batch x (embed + cond + hidden) times (in x 4H).
template <auto Gemm>
void BM_gemm_nn(benchmark::State& state) {
  const std::size_t m = state.range(0), k = state.range(1), n = state.range(2);
  auto a = random_vec(m * k, 1), b = random_vec(k * n, 2), c = std::vector<double>(m * n);
  for (auto _ : state) {
    Gemm(m, n, k, a.data(), k, b.data(), n, 0.0, c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * m * n * k);
}

template <auto Gemm>
void BM_gemm_tn(benchmark::State& state) {
  const std::size_t m = state.range(0), k = state.range(1), n = state.range(2);
  auto a = random_vec(k * m, 3), b = random_vec(k * n, 4), c = std::vector<double>(m * n);
  for (auto _ : state) {
    Gemm(m, n, k, a.data(), m, b.data(), n, 1.0, c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * m * n * k);
}

template <auto Fwd>
void BM_lstm_pointwise(benchmark::State& state) {
  const std::size_t n = state.range(0), h = state.range(1);
  const auto pre = random_vec(n * 4 * h, 5);
  auto gates = pre;
  auto c_prev = random_vec(n * h, 6);
  std::vector<double> c(n * h), hh(n * h), tc(n * h);
  for (auto _ : state) {
    state.PauseTiming();
    gates = pre;
    state.ResumeTiming();
    Fwd(n, h, gates.data(), c_prev.data(), c.data(), hh.data(), tc.data());
    benchmark::DoNotOptimize(hh.data());
  }
  state.SetItemsProcessed(state.iterations() * n * h);
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({64, 193, 512})->Args({64, 256, 512})->Args({512, 128, 19});
}

void BM_train_batch(benchmark::State& state) {
  nn::ScopedKernelMode mode(state.range(0) ? nn::KernelMode::parallel : nn::KernelMode::reference);
  ModelConfig cfg;
  ConditionalLstm model(cfg, 1);
  Rng rng(7);
  std::vector<TokenSequence> seqs;
  std::vector<std::vector<double>> conds;
  for (int i = 0; i < 64; ++i) {
    TokenSequence t{kStartToken};
    const std::size_t len = 5 + rng.uniform_index(15);
    for (std::size_t j = 0; j < len; ++j) t.push_back(3 + static_cast<int>(rng.uniform_index(16)));
    t.push_back(kStopToken);
    seqs.push_back(t);
    conds.push_back({rng.uniform() * 2 - 1});
  }
  std::vector<SequenceRow> rows;
  for (std::size_t i = 0; i < seqs.size(); ++i) rows.push_back({&seqs[i], &conds[i], 1.0});
  for (auto _ : state) {
    nn::Tape tape;
    model.params().zero_grad();
    const nn::Var loss = model.weighted_nll(tape, rows);
    tape.backward(loss);
    benchmark::DoNotOptimize(model.params()[0].grad.data());
  }
}

}  // namespace

BENCHMARK(BM_gemm_nn<condgen::nn::reference::gemm_nn>)->Name("gemm_nn/reference")->Apply(gemm_shapes);
BENCHMARK(BM_gemm_nn<condgen::nn::parallel::gemm_nn>)->Name("gemm_nn/parallel")->Apply(gemm_shapes);
BENCHMARK(BM_gemm_tn<condgen::nn::reference::gemm_tn>)->Name("gemm_tn/reference")->Apply(gemm_shapes);
BENCHMARK(BM_gemm_tn<condgen::nn::parallel::gemm_tn>)->Name("gemm_tn/parallel")->Apply(gemm_shapes);
BENCHMARK(BM_lstm_pointwise<condgen::nn::reference::lstm_pointwise_forward>)
    ->Name("lstm_pointwise/reference")
    ->Args({64, 128})
    ->Args({256, 128});
BENCHMARK(BM_lstm_pointwise<condgen::nn::parallel::lstm_pointwise_forward>)
    ->Name("lstm_pointwise/parallel")
    ->Args({64, 128})
    ->Args({256, 128});
BENCHMARK(BM_train_batch)->Name("train_batch_64/reference")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_train_batch)->Name("train_batch_64/parallel")->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
