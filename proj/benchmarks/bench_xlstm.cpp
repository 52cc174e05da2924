// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "xlstm/config.hpp"
#include "xlstm/mlstm.hpp"
#include "xlstm/model.hpp"
#include "xlstm/numerics.hpp"
#include "xlstm/slstm.hpp"
#include "xlstm/trainer.hpp"

namespace xlstm {
namespace {

Tensor random(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  rng.fill_uniform(t, -1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const Tensor a = random({n, n}, 1), b = random({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_SLstmForward(benchmark::State& state) {
  const auto steps = std::size_t(state.range(0)), d = std::size_t(state.range(1));
  SLstmConfig c;
  c.input_dim = d;
  c.hidden_dim = d;
  Rng rng(3);
  const SLstmParams p = SLstmParams::init(c, rng);
  const Tensor x = random({steps, d}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(slstm_forward(p, x).h);
  state.SetItemsProcessed(state.iterations() * std::int64_t(steps));
}
BENCHMARK(BM_SLstmForward)->Args({64, 64})->Args({64, 128});

void BM_SLstmBackward(benchmark::State& state) {
  const auto steps = std::size_t(state.range(0)), d = std::size_t(state.range(1));
  SLstmConfig c;
  c.input_dim = d;
  c.hidden_dim = d;
  Rng rng(3);
  const SLstmParams p = SLstmParams::init(c, rng);
  const SLstmSequence s = slstm_forward(p, random({steps, d}, 4));
  const Tensor g = random({steps, d}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(slstm_backward(p, s.cache, g));
  state.SetItemsProcessed(state.iterations() * std::int64_t(steps));
}
BENCHMARK(BM_SLstmBackward)->Args({64, 64})->Args({64, 128});

MLstmParams mlstm_params(std::size_t d) {
  MLstmConfig c;
  c.input_dim = d;
  c.hidden_dim = d;
  Rng rng(6);
  return MLstmParams::init(c, rng);
}

void BM_MLstmParallel(benchmark::State& state) {
  const auto steps = std::size_t(state.range(0)), d = std::size_t(state.range(1));
  const MLstmParams p = mlstm_params(d);
  const Tensor x = random({steps, d}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(mlstm_parallel_forward(p, x).h);
  state.SetItemsProcessed(state.iterations() * std::int64_t(steps));
}
BENCHMARK(BM_MLstmParallel)->Args({64, 128})->Args({256, 128});

void BM_MLstmRecurrent(benchmark::State& state) {
  const auto steps = std::size_t(state.range(0)), d = std::size_t(state.range(1));
  const MLstmParams p = mlstm_params(d);
  const Tensor x = random({steps, d}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(mlstm_recurrent_forward(p, x).h);
  state.SetItemsProcessed(state.iterations() * std::int64_t(steps));
}
BENCHMARK(BM_MLstmRecurrent)->Args({64, 128})->Args({256, 128});

void BM_ModelForwardBackward(benchmark::State& state) {
  StackConfig c;
  c.num_blocks = 2;
  c.ratio_mlstm = std::size_t(state.range(0));
  c.ratio_slstm = std::size_t(state.range(1));
  c.embedding_dim = 128;
  c.vocab_size = 512;
  Rng rng(8);
  const ModelParams m = ModelParams::init(c, rng);
  std::vector<std::int32_t> tokens(64);
  for (auto& t : tokens) t = std::int32_t(rng.uniform_int(0, 511));
  const Tensor g = random({64, 512}, 9);
  for (auto _ : state) {
    const ModelOutput out = model_forward(m, tokens);
    benchmark::DoNotOptimize(model_backward(m, out.cache, g));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ModelForwardBackward)->Args({1, 0})->Args({0, 1})->Args({1, 1})->Unit(benchmark::kMillisecond);

void BM_TrainStepParity(benchmark::State& state) {
  RunConfig c;
  c.model.num_blocks = 2;
  c.model.ratio_mlstm = 0;
  c.model.ratio_slstm = 1;
  c.model.embedding_dim = 64;
  c.model.slstm.conv_kernel = 0;
  c.train.batch_size = std::size_t(state.range(0));
  c.train.steps = 1000000;
  c.finalize();
  Trainer trainer(c);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStepParity)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace xlstm

BENCHMARK_MAIN();
