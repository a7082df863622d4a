#include "skilleval/encoding.hpp"

#include <cmath>
#include <string>

#include "skilleval/errors.hpp"
#include "skilleval/parallel.hpp"
#include "skilleval/rng.hpp"
#include "skilleval/tensor_io.hpp"

namespace skilleval {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log N(x; mu_k, diag v_k) for every component, plus log weights.
Eigen::VectorXd log_joint(const GmmModel& gmm, const Eigen::VectorXd& x) {
  const int k = gmm.components();
  Eigen::VectorXd out(k);
  for (int c = 0; c < k; ++c) {
    const auto mu = gmm.means.row(c).transpose();
    const auto var = gmm.variances.row(c).transpose();
    const double quad = ((x - mu).array().square() / var.array()).sum();
    const double logdet = var.array().log().sum();
    out(c) = std::log(gmm.weights(c)) -
             0.5 * (gmm.dim() * kLog2Pi + logdet + quad);
  }
  return out;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& frames, int d_pca) {
  const Eigen::Index n = frames.rows();
  const Eigen::Index d = frames.cols();
  if (d_pca < 1) throw ConfigError("d_pca must be >= 1, got " + std::to_string(d_pca));
  if (d_pca > d) {
    throw ConfigError("d_pca " + std::to_string(d_pca) + " exceeds input dimension " +
                      std::to_string(d));
  }
  if (n <= d_pca) {
    throw ConfigError("need more than d_pca samples to fit PCA, got " + std::to_string(n));
  }
  if (!frames.allFinite()) throw ConfigError("PCA input contains non-finite values");

  PcaModel model;
  model.mean = frames.colwise().mean();
  Eigen::MatrixXd centered = frames.rowwise() - model.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  // Ascending from the solver; flip to descending.
  Eigen::VectorXd evals = solver.eigenvalues().reverse();
  Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

  const double lambda_max = std::max(evals(0), 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals(i) > lambda_max * 1e-10 && evals(i) > 0.0) ++rank;
  }
  if (d_pca > rank) {
    throw ConfigError("d_pca " + std::to_string(d_pca) + " exceeds effective rank " +
                      std::to_string(rank) + " of the input");
  }

  model.basis = evecs.leftCols(d_pca);
  model.eigenvalues = evals.head(d_pca);
  return model;
}

Eigen::VectorXd pca_project(const PcaModel& pca, const Eigen::VectorXd& x) {
  if (x.size() != pca.basis.rows()) {
    throw ConfigError("PCA projection dimension mismatch: got " + std::to_string(x.size()) +
                      ", expected " + std::to_string(pca.basis.rows()));
  }
  return pca.basis.transpose() * (x - pca.mean);
}

Eigen::MatrixXd pca_project_rows(const PcaModel& pca, const Eigen::MatrixXd& rows) {
  if (rows.cols() != pca.basis.rows()) {
    throw ConfigError("PCA projection dimension mismatch: got " + std::to_string(rows.cols()) +
                      ", expected " + std::to_string(pca.basis.rows()));
  }
  return (rows.rowwise() - pca.mean.transpose()) * pca.basis;
}

GmmFitResult fit_gmm(const Eigen::MatrixXd& frames, int k, const GmmFitOptions& opts) {
  const Eigen::Index n = frames.rows();
  const Eigen::Index d = frames.cols();
  if (k < 1) throw ConfigError("GMM component count must be >= 1, got " + std::to_string(k));
  if (n < k) {
    throw ConfigError("GMM needs at least K samples: K=" + std::to_string(k) +
                      ", N=" + std::to_string(n));
  }
  if (opts.em_iters < 0) throw ConfigError("em_iters must be >= 0");
  if (!(opts.variance_floor > 0.0)) throw ConfigError("variance_floor must be > 0");
  if (!frames.allFinite()) throw ConfigError("GMM input contains non-finite values");

  Rng rng(derive_seed(opts.seed, "gmm-init"));

  // Global per-dimension variance; initial spread and empty-component reset.
  Eigen::VectorXd global_mean = frames.colwise().mean();
  Eigen::VectorXd global_var =
      ((frames.rowwise() - global_mean.transpose()).array().square().colwise().sum() /
       static_cast<double>(n))
          .transpose();
  global_var = global_var.cwiseMax(opts.variance_floor);

  GmmFitResult result;
  GmmModel& gmm = result.model;
  gmm.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  gmm.means.resize(k, d);
  gmm.variances.resize(k, d);

  // Farthest-point seeding: a random first center, then repeatedly the
  // sample farthest from everything chosen so far.
  std::vector<Eigen::Index> chosen;
  chosen.push_back(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd min_dist =
      (frames.rowwise() - frames.row(chosen[0])).rowwise().squaredNorm();
  while (static_cast<int>(chosen.size()) < k) {
    Eigen::Index far = 0;
    min_dist.maxCoeff(&far);
    chosen.push_back(far);
    min_dist = min_dist.cwiseMin(
        (frames.rowwise() - frames.row(far)).rowwise().squaredNorm().eval());
  }
  for (int c = 0; c < k; ++c) {
    gmm.means.row(c) = frames.row(chosen[c]);
    gmm.variances.row(c) = global_var.transpose();
  }

  auto full_log_likelihood = [&](void) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      ll += log_sum_exp(log_joint(gmm, frames.row(i).transpose()));
    }
    return ll;
  };

  result.log_likelihood.push_back(full_log_likelihood());

  Eigen::MatrixXd resp(n, k);
  for (int iter = 0; iter < opts.em_iters; ++iter) {
    // E-step.
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd lp = log_joint(gmm, frames.row(i).transpose());
      const double lse = log_sum_exp(lp);
      resp.row(i) = (lp.array() - lse).exp().transpose();
    }

    // M-step.
    Eigen::VectorXd nk = resp.colwise().sum();
    for (int c = 0; c < k; ++c) {
      if (nk(c) < 1e-9) {
        // Starved component: restart it on a random sample.
        const Eigen::Index pick =
            static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        gmm.means.row(c) = frames.row(pick);
        gmm.variances.row(c) = global_var.transpose();
        nk(c) = 1.0;
        result.reinit_events++;
        continue;
      }
      Eigen::VectorXd mu = (resp.col(c).transpose() * frames).transpose() / nk(c);
      Eigen::MatrixXd centered = frames.rowwise() - mu.transpose();
      Eigen::VectorXd var =
          (centered.array().square().colwise() * resp.col(c).array()).colwise().sum().transpose() /
          nk(c);
      gmm.means.row(c) = mu.transpose();
      gmm.variances.row(c) = var.cwiseMax(opts.variance_floor).transpose();
    }
    gmm.weights = nk / nk.sum();

    result.log_likelihood.push_back(full_log_likelihood());
  }
  return result;
}

double gmm_log_likelihood(const GmmModel& gmm, const Eigen::MatrixXd& frames) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    ll += log_sum_exp(log_joint(gmm, frames.row(i).transpose()));
  }
  return ll;
}

Eigen::VectorXd gmm_responsibilities(const GmmModel& gmm, const Eigen::VectorXd& x) {
  Eigen::VectorXd lp = log_joint(gmm, x);
  return (lp.array() - log_sum_exp(lp)).exp();
}

Eigen::VectorXd fv_raw(const GmmModel& gmm, const Eigen::VectorXd& x) {
  if (x.size() != gmm.dim()) {
    throw ConfigError("FV input dimension mismatch: got " + std::to_string(x.size()) +
                      ", expected " + std::to_string(gmm.dim()));
  }
  if (!x.allFinite()) throw NumericError("FV input contains non-finite values");

  const int k = gmm.components();
  const int d = gmm.dim();
  const Eigen::VectorXd gamma = gmm_responsibilities(gmm, x);
  Eigen::VectorXd fv(2 * k * d);
  for (int c = 0; c < k; ++c) {
    const Eigen::ArrayXd sigma = gmm.variances.row(c).transpose().array().sqrt();
    const Eigen::ArrayXd u = (x - gmm.means.row(c).transpose()).array() / sigma;
    const double w = gmm.weights(c);
    fv.segment(c * d, d) = (gamma(c) * u / std::sqrt(w)).matrix();
    fv.segment(k * d + c * d, d) = (gamma(c) * (u.square() - 1.0) / std::sqrt(2.0 * w)).matrix();
  }
  return fv;
}

Eigen::VectorXd encode_fv(const GmmModel& gmm, const Eigen::VectorXd& x) {
  Eigen::VectorXd fv = fv_raw(gmm, x);
  // Signed square root, then L2 normalization.
  fv = fv.array().sign() * fv.array().abs().sqrt();
  const double norm = fv.norm();
  if (norm > 0.0) fv /= norm;
  return fv;
}

Eigen::MatrixXd encode_sequence(const PcaModel& pca, const GmmModel& gmm,
                                const Eigen::MatrixXd& seq) {
  if (seq.cols() != pca.d_raw()) {
    throw ConfigError("sequence dimension " + std::to_string(seq.cols()) +
                      " does not match encoder d_raw " + std::to_string(pca.d_raw()));
  }
  if (gmm.dim() != pca.d_pca()) {
    throw ConfigError("GMM dimension does not match PCA output dimension");
  }
  const Eigen::Index t = seq.rows();
  Eigen::MatrixXd out(t, 2 * gmm.components() * gmm.dim());
  parallel_for(static_cast<std::size_t>(t), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) =
        encode_fv(gmm, pca_project(pca, seq.row(static_cast<Eigen::Index>(i)).transpose()))
            .transpose();
  });
  return out;
}

void save_encoder(const FvEncoder& enc, const std::filesystem::path& path) {
  std::vector<TensorView> tensors = {
      view_of("pca.mean", enc.pca.mean),
      view_of("pca.basis", enc.pca.basis),
      view_of("pca.eigenvalues", enc.pca.eigenvalues),
      view_of("gmm.weights", enc.gmm.weights),
      view_of("gmm.means", enc.gmm.means),
      view_of("gmm.variances", enc.gmm.variances),
  };
  write_tensor_file(path, "SKILLEVAL-ENC v1", "fv_encoder", tensors);
}

FvEncoder load_encoder(const std::filesystem::path& path) {
  TensorFile file = read_tensor_file(path, "SKILLEVAL-ENC v1", "fv_encoder");
  FvEncoder enc;
  enc.pca.mean = file.require("pca.mean").col(0);
  enc.pca.basis = file.require("pca.basis");
  enc.pca.eigenvalues = file.require("pca.eigenvalues").col(0);
  enc.gmm.weights = file.require("gmm.weights").col(0);
  enc.gmm.means = file.require("gmm.means");
  enc.gmm.variances = file.require("gmm.variances");

  const std::string where = path.string();
  if (enc.pca.basis.rows() != enc.pca.mean.size() || enc.pca.eigenvalues.size() != enc.pca.d_pca()) {
    throw FormatError(where + ": inconsistent PCA shapes");
  }
  if (enc.gmm.means.rows() != enc.gmm.components() ||
      enc.gmm.variances.rows() != enc.gmm.components() ||
      enc.gmm.means.cols() != enc.gmm.variances.cols()) {
    throw FormatError(where + ": inconsistent GMM shapes");
  }
  if (enc.gmm.dim() != enc.pca.d_pca()) {
    throw FormatError(where + ": GMM dimension does not match PCA output dimension");
  }
  if (enc.gmm.weights.minCoeff() <= 0.0 || std::abs(enc.gmm.weights.sum() - 1.0) > 1e-9) {
    throw FormatError(where + ": GMM weights must be positive and sum to 1");
  }
  if (enc.gmm.variances.minCoeff() <= 0.0) {
    throw FormatError(where + ": GMM variances must be positive");
  }
  return enc;
}

}  // namespace skilleval
