#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "skilleval/encoding.hpp"
#include "skilleval/rng.hpp"

namespace {

using namespace skilleval;

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return m;
}

// Encoder fitted once, reused by the per-frame and per-sequence benchmarks.
struct FittedEncoder {
  PcaModel pca;
  GmmModel gmm;

  FittedEncoder() {
    Rng rng(11);
    const Eigen::MatrixXd frames = random_matrix(rng, 2000, 16);
    pca = fit_pca(frames, 8);
    GmmFitOptions opts;
    opts.em_iters = 10;
    opts.seed = 11;
    gmm = fit_gmm(pca_project_rows(pca, frames), 8, opts).model;
  }
};

const FittedEncoder& fitted() {
  static const FittedEncoder enc;
  return enc;
}

// One EM fit at the pipeline's default component count; range(0) is the
// number of EM iterations.
void BM_FitGmm(benchmark::State& state) {
  Rng rng(3);
  const Eigen::MatrixXd data = random_matrix(rng, 2000, 8);
  GmmFitOptions opts;
  opts.em_iters = static_cast<int>(state.range(0));
  opts.seed = 3;
  for (auto _ : state) {
    const GmmFitResult fit = fit_gmm(data, 8, opts);
    benchmark::DoNotOptimize(fit.log_likelihood.back());
  }
}
BENCHMARK(BM_FitGmm)->Arg(5)->Arg(25)->Unit(benchmark::kMillisecond);

// Single-frame descriptor: projection plus normalized Fisher Vector.
void BM_EncodeFrame(benchmark::State& state) {
  const FittedEncoder& enc = fitted();
  Rng rng(5);
  const Eigen::VectorXd frame = random_matrix(rng, 16, 1).col(0);
  for (auto _ : state) {
    const Eigen::VectorXd fv = encode_fv(enc.gmm, pca_project(enc.pca, frame));
    benchmark::DoNotOptimize(fv(0));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncodeFrame)->Unit(benchmark::kMicrosecond);

// Whole-segment encoding at the default maximum segment length.
void BM_EncodeSequence(benchmark::State& state) {
  const FittedEncoder& enc = fitted();
  Rng rng(9);
  const Eigen::MatrixXd frames = random_matrix(rng, 60, 16);
  for (auto _ : state) {
    const Eigen::MatrixXd encoded = encode_sequence(enc.pca, enc.gmm, frames);
    benchmark::DoNotOptimize(encoded(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * frames.rows());
}
BENCHMARK(BM_EncodeSequence)->Unit(benchmark::kMicrosecond);

}  // namespace
