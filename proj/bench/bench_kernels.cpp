// Parallel kernels against their serial references at model-sized shapes.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "tfmt/kernels.hpp"
#include "tfmt/random.hpp"

namespace k = tfmt::kernels;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  tfmt::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const k::ConvShape s{int(state.range(0)), int(state.range(1)), int(state.range(1))};
  const auto x = filled(std::size_t(s.n) * s.n * s.in, 1);
  const auto w = filled(std::size_t(s.out) * 9 * s.in, 2);
  const auto b = filled(std::size_t(s.out), 3);
  std::vector<double> y(std::size_t(s.n) * s.n * s.out);
  for (auto _ : state) {
    if constexpr (Parallel) k::conv3x3_forward(x, w, b, s, y);
    else k::reference::conv3x3_forward(x, w, b, s, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * s.n * s.n * s.out * 9 * s.in);
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const k::ConvShape s{int(state.range(0)), int(state.range(1)), int(state.range(1))};
  const auto x = filled(std::size_t(s.n) * s.n * s.in, 4);
  const auto dy = filled(std::size_t(s.n) * s.n * s.out, 5);
  const auto w = filled(std::size_t(s.out) * 9 * s.in, 6);
  std::vector<double> dx(x.size()), dw(w.size()), db(std::size_t(s.out));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv3x3_backward_input(dy, w, s, dx);
      k::conv3x3_backward_params(dy, x, s, dw, db);
    } else {
      k::reference::conv3x3_backward_input(dy, w, s, dx);
      k::reference::conv3x3_backward_params(dy, x, s, dw, db);
    }
    benchmark::DoNotOptimize(dx.data());
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void BM_Affine(benchmark::State& state) {
  const int rows = int(state.range(0)), in = int(state.range(1)), out = int(state.range(2));
  const auto x = filled(std::size_t(rows) * in, 7);
  const auto w = filled(std::size_t(out) * in, 8);
  const auto b = filled(std::size_t(out), 9);
  std::vector<double> y(std::size_t(rows) * out);
  for (auto _ : state) {
    if constexpr (Parallel) k::affine_rows(x, rows, in, w, b, out, y);
    else k::reference::affine_rows(x, rows, in, w, b, out, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_PairwiseDistances(benchmark::State& state) {
  const int m = int(state.range(0)), dim = int(state.range(1));
  const auto z = filled(std::size_t(m) * dim, 10);
  std::vector<double> out(std::size_t(m) * m);
  for (auto _ : state) {
    if constexpr (Parallel) k::pairwise_sq_dists(z, m, dim, out);
    else k::reference::pairwise_sq_dists(z, m, dim, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

// Sentence length x channels: the training default and a wider model.
BENCHMARK(BM_ConvForward<false>)->Args({24, 16})->Args({48, 32});
BENCHMARK(BM_ConvForward<true>)->Args({24, 16})->Args({48, 32});
BENCHMARK(BM_ConvBackward<false>)->Args({24, 16})->Args({48, 32});
BENCHMARK(BM_ConvBackward<true>)->Args({24, 16})->Args({48, 32});
// Table projection: n^2 rows of [h_i, h_j, pool, bilinear] into d.
BENCHMARK(BM_Affine<false>)->Args({576, 49, 16})->Args({2304, 97, 32});
BENCHMARK(BM_Affine<true>)->Args({576, 49, 16})->Args({2304, 97, 32});
// MMD over pooled region features (3d dims).
BENCHMARK(BM_PairwiseDistances<false>)->Args({64, 48})->Args({256, 96});
BENCHMARK(BM_PairwiseDistances<true>)->Args({64, 48})->Args({256, 96});

BENCHMARK_MAIN();
