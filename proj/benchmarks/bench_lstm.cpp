#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "skilleval/lstm.hpp"
#include "skilleval/rng.hpp"

namespace {

using namespace skilleval;

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return m;
}

// Forward pass of a two-layer stack over a sequence; range(0) is the
// sequence length, range(1) the hidden width.
void BM_LstmForward(benchmark::State& state) {
  const Eigen::Index t_len = state.range(0);
  const Eigen::Index hidden = state.range(1);
  const Eigen::Index input = 128;
  LstmStack net = make_lstm(input, hidden, 2, 1);
  Rng rng(7);
  const Eigen::MatrixXd seq = random_matrix(rng, t_len, input);
  for (auto _ : state) {
    const LstmCache cache = lstm_forward(net, seq);
    benchmark::DoNotOptimize(cache.hidden()(t_len - 1, 0));
  }
  state.SetItemsProcessed(state.iterations() * t_len);
}
BENCHMARK(BM_LstmForward)
    ->Args({40, 128})
    ->Args({60, 128})
    ->Args({40, 256})
    ->Unit(benchmark::kMicrosecond);

// Full training step cost: forward plus exact backpropagation through time
// with a dense per-step upstream gradient.
void BM_LstmForwardBackward(benchmark::State& state) {
  const Eigen::Index t_len = state.range(0);
  const Eigen::Index hidden = state.range(1);
  const Eigen::Index input = 128;
  LstmStack net = make_lstm(input, hidden, 2, 1);
  Rng rng(7);
  const Eigen::MatrixXd seq = random_matrix(rng, t_len, input);
  const Eigen::MatrixXd d_hidden = random_matrix(rng, t_len, hidden);
  for (auto _ : state) {
    const LstmCache cache = lstm_forward(net, seq);
    const LstmGradients grads = lstm_backward(net, cache, d_hidden);
    benchmark::DoNotOptimize(grads.layers[0].w(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * t_len);
}
BENCHMARK(BM_LstmForwardBackward)
    ->Args({40, 128})
    ->Args({60, 128})
    ->Unit(benchmark::kMicrosecond);

}  // namespace
