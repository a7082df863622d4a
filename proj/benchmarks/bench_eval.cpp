#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "skilleval/evaluation.hpp"
#include "skilleval/lstm.hpp"
#include "skilleval/rng.hpp"
#include "skilleval/siamese.hpp"

namespace {

using namespace skilleval;

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return m;
}

// Threshold-sweep ROC over a quantized score set; range(0) is the number
// of scored pairs.
void BM_RocAuc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(21);
  std::vector<ScoredPair> scored;
  scored.reserve(n);
  for (int i = 0; i < n; ++i) {
    ScoredPair p;
    p.inst_id = i;
    p.user_id = i + n;
    p.label = (i % 3 == 0) ? 1 : 0;
    p.score = static_cast<double>(rng.uniform_int(64)) / 64.0;
    scored.push_back(p);
  }
  for (auto _ : state) {
    const RocCurve curve = roc_auc(scored);
    benchmark::DoNotOptimize(curve.auc);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

// Average-pool cosine score for one pair of segment-feature lists.
void BM_BaselineCosine(benchmark::State& state) {
  Rng rng(23);
  const Eigen::MatrixXd inst = random_matrix(rng, 12, 128);
  const Eigen::MatrixXd user = random_matrix(rng, 4, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(baseline_cosine(inst, user, 0.5));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BaselineCosine)->Unit(benchmark::kMicrosecond);

// Learned-metric score for one variable-length pair: two embeddings plus
// the distance between them.
void BM_PairDistance(benchmark::State& state) {
  LstmStack net = make_lstm(128, 128, 2, 1);
  Rng rng(25);
  const Eigen::MatrixXd inst = random_matrix(rng, 12, 128);
  const Eigen::MatrixXd user = random_matrix(rng, 4, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pair_distance(net, inst, user));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PairDistance)->Unit(benchmark::kMicrosecond);

}  // namespace
