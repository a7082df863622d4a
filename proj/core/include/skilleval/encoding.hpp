#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace skilleval {

struct PcaModel {
  Eigen::VectorXd mean;         // d_raw
  Eigen::MatrixXd basis;        // d_raw x d_pca, orthonormal columns
  Eigen::VectorXd eigenvalues;  // d_pca, descending

  int d_raw() const { return static_cast<int>(basis.rows()); }
  int d_pca() const { return static_cast<int>(basis.cols()); }
};

// Top-d_pca eigenvectors of the sample covariance (1/(N-1) convention),
// eigenvalue-descending. Throws when d_pca exceeds the effective rank.
PcaModel fit_pca(const Eigen::MatrixXd& frames /* N x d_raw */, int d_pca);

Eigen::VectorXd pca_project(const PcaModel& pca, const Eigen::VectorXd& x);
Eigen::MatrixXd pca_project_rows(const PcaModel& pca, const Eigen::MatrixXd& rows);

struct GmmModel {
  Eigen::VectorXd weights;    // K, positive, sums to 1
  Eigen::MatrixXd means;      // K x d
  Eigen::MatrixXd variances;  // K x d, diagonal covariances, floored

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct GmmFitOptions {
  int em_iters = 25;
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GmmFitResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // total LL after each EM iteration
  int reinit_events = 0;               // empty components recovered from a random datum
};

// Seeded farthest-point initialization followed by EM. Total train
// log-likelihood is non-decreasing per iteration (up to 1e-9) except across
// an iteration that had to reinitialize an empty component.
GmmFitResult fit_gmm(const Eigen::MatrixXd& frames /* N x d */, int k, const GmmFitOptions& opts);

// Per-frame total log-likelihood under the mixture.
double gmm_log_likelihood(const GmmModel& gmm, const Eigen::MatrixXd& frames);

// Posterior responsibilities gamma_k(x).
Eigen::VectorXd gmm_responsibilities(const GmmModel& gmm, const Eigen::VectorXd& x);

// Unnormalized Fisher vector, length 2*K*d: mean-gradient block then
// variance-gradient block, component-major within each block.
Eigen::VectorXd fv_raw(const GmmModel& gmm, const Eigen::VectorXd& x);

// fv_raw followed by signed square root and L2 normalization. A zero raw
// vector stays zero; anything else comes back with unit norm.
Eigen::VectorXd encode_fv(const GmmModel& gmm, const Eigen::VectorXd& x);

// Row t is encode_fv of the PCA projection of frame t. T x (2*K*d_pca).
Eigen::MatrixXd encode_sequence(const PcaModel& pca, const GmmModel& gmm,
                                const Eigen::MatrixXd& seq /* T x d_raw */);

struct FvEncoder {
  PcaModel pca;
  GmmModel gmm;

  int fv_dim() const { return 2 * gmm.components() * gmm.dim(); }
};

void save_encoder(const FvEncoder& enc, const std::filesystem::path& path);
FvEncoder load_encoder(const std::filesystem::path& path);

}  // namespace skilleval
