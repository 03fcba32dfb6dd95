// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

// Parallel kernels against the serial reference on the layer shapes of the
// batched DAFC network (32 examples per pass).

#include <benchmark/benchmark.h>

#include "dafc/dafc_net.hpp"
#include "dafc/kernels.hpp"

using namespace dafc;

namespace {

// {rows, in, out}: the row and column maps of block 3 and the first dense layer.
const std::vector<std::vector<int64_t>> kShapes = {{32 * 128, 512, 1024}, {32 * 1024, 128, 256}, {32, 512, 1024}};

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

template <bool kFast>
void BM_AffineForward(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), state.range(1), 1);
  const Matrix W = random_matrix(state.range(1), state.range(2), 2);
  const Vector b = Vector::Zero(state.range(2));
  Matrix out;
  for (auto _ : state) {
    if constexpr (kFast) {
      kernels::affine_forward(x, W, b, Activation::kTanh, out);
    } else {
      reference::affine_forward(x, W, b, Activation::kTanh, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["flops"] = benchmark::Counter(2.0 * static_cast<double>(state.range(0) * state.range(1) * state.range(2)),
                                               benchmark::Counter::kIsIterationInvariantRate);
}

template <bool kFast>
void BM_AffineBackward(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), state.range(1), 1);
  const Matrix W = random_matrix(state.range(1), state.range(2), 2);
  const Vector b = Vector::Zero(state.range(2));
  Matrix out;
  kernels::affine_forward(x, W, b, Activation::kRelu, out);
  const Matrix g = random_matrix(state.range(0), state.range(2), 3);
  Matrix gW = Matrix::Zero(W.rows(), W.cols()), gx;
  Vector gb = Vector::Zero(W.cols());
  for (auto _ : state) {
    if constexpr (kFast) {
      kernels::affine_backward(x, W, Activation::kRelu, out, g, gW, gb, &gx);
    } else {
      reference::affine_backward(x, W, Activation::kRelu, out, g, gW, gb, &gx);
    }
    benchmark::DoNotOptimize(gW.data());
  }
}

template <bool kFast>
void BM_BlockTranspose(benchmark::State& state) {
  const Matrix x = random_matrix(32 * 256, 1024, 4);
  Matrix out;
  for (auto _ : state) {
    if constexpr (kFast) {
      kernels::block_transpose(x, 256, out);
    } else {
      reference::block_transpose(x, 256, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * x.size() * static_cast<int64_t>(sizeof(double)) * 2);
}

void BM_Predict(benchmark::State& state) {
  const Network net = build_network(16, 16, 121, 1);
  std::vector<CMatrix> xs;
  Rng rng(5);
  for (int i = 0; i < state.range(0); ++i) {
    CMatrix X(16, 16);
    for (Index j = 0; j < X.size(); ++j) X(j) = sample_complex_normal(rng);
    xs.push_back(X);
  }
  std::vector<const CMatrix*> in;
  for (const auto& x : xs) in.push_back(&x);
  for (auto _ : state) benchmark::DoNotOptimize(net.predict(in).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_AffineForward<true>)
    ->Args(kShapes[0])
    ->Args(kShapes[1])
    ->Args(kShapes[2])
    ->Unit(benchmark::kMillisecond)
    ->Name("affine_forward/parallel");
BENCHMARK(BM_AffineForward<false>)
    ->Args(kShapes[0])
    ->Args(kShapes[1])
    ->Args(kShapes[2])
    ->Unit(benchmark::kMillisecond)
    ->Name("affine_forward/reference");
BENCHMARK(BM_AffineBackward<true>)
    ->Args(kShapes[1])
    ->Args(kShapes[2])
    ->Unit(benchmark::kMillisecond)
    ->Name("affine_backward/parallel");
BENCHMARK(BM_AffineBackward<false>)
    ->Args(kShapes[1])
    ->Args(kShapes[2])
    ->Unit(benchmark::kMillisecond)
    ->Name("affine_backward/reference");
BENCHMARK(BM_BlockTranspose<true>)->Unit(benchmark::kMillisecond)->Name("block_transpose/parallel");
BENCHMARK(BM_BlockTranspose<false>)->Unit(benchmark::kMillisecond)->Name("block_transpose/reference");
BENCHMARK(BM_Predict)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond)->Name("dafc_predict");

BENCHMARK_MAIN();
