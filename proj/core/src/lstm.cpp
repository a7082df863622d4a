#include "skilleval/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skilleval/errors.hpp"
#include "skilleval/rng.hpp"

namespace skilleval {
namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& a) { return 1.0 / (1.0 + (-a).exp()); }

}  // namespace

LstmStack make_lstm(Eigen::Index input_dim, Eigen::Index hidden_dim, int depth,
                    std::uint64_t seed) {
  if (input_dim < 1) throw ConfigError("LSTM input_dim must be >= 1");
  if (hidden_dim < 1) throw ConfigError("LSTM hidden_dim must be >= 1");
  if (depth < 1) throw ConfigError("LSTM depth must be >= 1");

  LstmStack net;
  net.layers.resize(depth);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (int l = 0; l < depth; ++l) {
    Rng rng(derive_seed(seed, "lstm-layer", static_cast<std::uint64_t>(l)));
    const Eigen::Index in = (l == 0) ? input_dim : hidden_dim;
    LstmLayer& layer = net.layers[l];
    layer.w.resize(4 * hidden_dim, in + hidden_dim);
    for (Eigen::Index i = 0; i < layer.w.size(); ++i) {
      layer.w.data()[i] = rng.uniform(-scale, scale);
    }
    layer.b = Eigen::VectorXd::Zero(4 * hidden_dim);
    layer.b.segment(hidden_dim, hidden_dim).setOnes();  // forget gate
  }
  return net;
}

LstmGradients zero_gradients(const LstmStack& net) {
  LstmGradients g;
  g.layers.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    g.layers[l].w = Eigen::MatrixXd::Zero(net.layers[l].w.rows(), net.layers[l].w.cols());
    g.layers[l].b = Eigen::VectorXd::Zero(net.layers[l].b.size());
  }
  return g;
}

void add_gradients(LstmGradients& acc, const LstmGradients& g) {
  if (acc.layers.size() != g.layers.size()) {
    throw ConfigError("gradient accumulation across mismatched stacks");
  }
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    acc.layers[l].w += g.layers[l].w;
    acc.layers[l].b += g.layers[l].b;
  }
}

LstmCache lstm_forward(const LstmStack& net, const Eigen::MatrixXd& seq) {
  if (seq.rows() < 1) throw ConfigError("LSTM input sequence is empty");
  if (seq.cols() != net.input_dim()) {
    throw ConfigError("LSTM input width " + std::to_string(seq.cols()) +
                      " does not match network input_dim " + std::to_string(net.input_dim()));
  }

  const Eigen::Index t_len = seq.rows();
  LstmCache cache;
  cache.input = seq;
  cache.layers.resize(net.layers.size());

  const Eigen::MatrixXd* x = &cache.input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LstmLayer& layer = net.layers[l];
    const Eigen::Index h = layer.hidden_dim();
    const Eigen::Index in = layer.input_dim();

    auto& lc = cache.layers[l];
    lc.gi.resize(t_len, h);
    lc.gf.resize(t_len, h);
    lc.go.resize(t_len, h);
    lc.gg.resize(t_len, h);
    lc.c.resize(t_len, h);
    lc.tanh_c.resize(t_len, h);
    lc.h.resize(t_len, h);

    // Input-to-gate products for all steps at once; only the recurrent
    // part stays inside the time loop.
    Eigen::MatrixXd zx = (*x) * layer.w.leftCols(in).transpose();
    zx.rowwise() += layer.b.transpose();
    const auto wh = layer.w.rightCols(h);

    Eigen::VectorXd z(4 * h);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(h);

    for (Eigen::Index t = 0; t < t_len; ++t) {
      z.noalias() = wh * h_prev;
      z += zx.row(t).transpose();

      const Eigen::ArrayXd gi = sigmoid(z.segment(0, h).array());
      const Eigen::ArrayXd gf = sigmoid(z.segment(h, h).array());
      const Eigen::ArrayXd go = sigmoid(z.segment(2 * h, h).array());
      const Eigen::ArrayXd gg = z.segment(3 * h, h).array().tanh();

      const Eigen::ArrayXd c = gf * c_prev.array() + gi * gg;
      const Eigen::ArrayXd tc = c.tanh();
      const Eigen::ArrayXd ht = go * tc;

      lc.gi.row(t) = gi.transpose();
      lc.gf.row(t) = gf.transpose();
      lc.go.row(t) = go.transpose();
      lc.gg.row(t) = gg.transpose();
      lc.c.row(t) = c.transpose();
      lc.tanh_c.row(t) = tc.transpose();
      lc.h.row(t) = ht.transpose();

      c_prev = c.matrix();
      h_prev = ht.matrix();
    }
    x = &lc.h;
  }
  return cache;
}

LstmGradients lstm_backward(const LstmStack& net, const LstmCache& cache,
                            const Eigen::MatrixXd& dh, Eigen::MatrixXd* d_input) {
  const Eigen::Index t_len = cache.steps();
  if (cache.layers.size() != net.layers.size()) {
    throw ConfigError("LSTM cache does not match network depth");
  }
  if (dh.rows() != t_len || dh.cols() != net.hidden_dim()) {
    throw ConfigError("hidden-state gradient shape mismatch: got " + std::to_string(dh.rows()) +
                      "x" + std::to_string(dh.cols()));
  }

  LstmGradients grads = zero_gradients(net);
  Eigen::MatrixXd dstream = dh;  // gradient on layer l's hidden outputs

  for (int l = net.depth() - 1; l >= 0; --l) {
    const LstmLayer& layer = net.layers[l];
    const auto& lc = cache.layers[l];
    const Eigen::Index h = layer.hidden_dim();
    const Eigen::Index in = layer.input_dim();
    const Eigen::MatrixXd& x = (l == 0) ? cache.input : cache.layers[l - 1].h;
    const auto wh = layer.w.rightCols(h);

    // Pre-activation gradients for every step; the weight and input
    // gradients then fall out of three whole-sequence products.
    Eigen::MatrixXd da_all(t_len, 4 * h);
    Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd dc_carry = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd da(4 * h);

    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      const Eigen::ArrayXd gi = lc.gi.row(t).transpose().array();
      const Eigen::ArrayXd gf = lc.gf.row(t).transpose().array();
      const Eigen::ArrayXd go = lc.go.row(t).transpose().array();
      const Eigen::ArrayXd gg = lc.gg.row(t).transpose().array();
      const Eigen::ArrayXd tc = lc.tanh_c.row(t).transpose().array();
      const Eigen::ArrayXd c_prev = (t > 0)
                                        ? Eigen::ArrayXd(lc.c.row(t - 1).transpose().array())
                                        : Eigen::ArrayXd(Eigen::ArrayXd::Zero(h));

      const Eigen::ArrayXd dht = dstream.row(t).transpose().array() + dh_rec.array();
      const Eigen::ArrayXd dgo = dht * tc;
      const Eigen::ArrayXd dc = dc_carry.array() + dht * go * (1.0 - tc.square());
      const Eigen::ArrayXd dgi = dc * gg;
      const Eigen::ArrayXd dgg = dc * gi;
      const Eigen::ArrayXd dgf = dc * c_prev;

      da.segment(0, h) = (dgi * gi * (1.0 - gi)).matrix();
      da.segment(h, h) = (dgf * gf * (1.0 - gf)).matrix();
      da.segment(2 * h, h) = (dgo * go * (1.0 - go)).matrix();
      da.segment(3 * h, h) = (dgg * (1.0 - gg.square())).matrix();
      da_all.row(t) = da.transpose();

      dh_rec.noalias() = wh.transpose() * da;
      dc_carry = (dc * gf).matrix();
    }

    // h_{t-1} rows: zero state before the first step.
    Eigen::MatrixXd h_prev(t_len, h);
    h_prev.row(0).setZero();
    if (t_len > 1) h_prev.bottomRows(t_len - 1) = lc.h.topRows(t_len - 1);

    grads.layers[l].w.leftCols(in).noalias() += da_all.transpose() * x;
    grads.layers[l].w.rightCols(h).noalias() += da_all.transpose() * h_prev;
    grads.layers[l].b += da_all.colwise().sum().transpose();

    dstream = da_all * layer.w.leftCols(in);
  }

  if (d_input != nullptr) *d_input = std::move(dstream);
  return grads;
}

std::vector<TensorView> param_views(LstmStack& net, const std::string& prefix) {
  std::vector<TensorView> views;
  views.reserve(2 * net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::string base = prefix + "layer" + std::to_string(l);
    views.push_back(view_of(base + ".w", net.layers[l].w));
    views.push_back(view_of(base + ".b", net.layers[l].b));
  }
  return views;
}

LstmStack stack_from_tensors(const TensorFile& file, const std::string& where) {
  LstmStack net;
  for (int l = 0;; ++l) {
    const std::string base = "layer" + std::to_string(l);
    const NamedTensor* w = file.find(base + ".w");
    if (w == nullptr) break;
    LstmLayer layer;
    layer.w = w->value;
    layer.b = file.require(base + ".b").col(0);
    if (layer.w.rows() % 4 != 0 || layer.b.size() != layer.w.rows()) {
      throw FormatError(where + ": malformed layer tensor " + base);
    }
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) throw FormatError(where + ": no LSTM layers");
  for (std::size_t l = 1; l < net.layers.size(); ++l) {
    if (net.layers[l].input_dim() != net.layers[l - 1].hidden_dim()) {
      throw FormatError(where + ": layer " + std::to_string(l) +
                        " input does not match the layer below");
    }
  }
  return net;
}

double clip_gradients(std::vector<TensorView> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip norm must be > 0");
  double sq = 0.0;
  for (const TensorView& g : grads) sq += g.map().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (TensorView& g : grads) g.map() *= scale;
  }
  return norm;
}

AdamState make_adam_state(const std::vector<TensorView>& params) {
  AdamState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const TensorView& p : params) {
    state.m.emplace_back(Eigen::MatrixXd::Zero(p.rows, p.cols));
    state.v.emplace_back(Eigen::MatrixXd::Zero(p.rows, p.cols));
  }
  return state;
}

void adam_step(std::vector<TensorView> params, const std::vector<TensorView>& grads,
               AdamState& state, const AdamOptions& opts) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ConfigError("optimizer state does not match parameter list");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows != grads[i].rows || params[i].cols != grads[i].cols) {
      throw ConfigError("gradient shape mismatch for " + params[i].name);
    }
    auto g = grads[i].map();
    state.m[i] = opts.beta1 * state.m[i] + (1.0 - opts.beta1) * g;
    state.v[i].array() = opts.beta2 * state.v[i].array() + (1.0 - opts.beta2) * g.array().square();
    params[i].map().array() -=
        opts.lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + opts.eps);
  }
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::vector<TensorView> params,
                           const std::vector<TensorView>& analytic, double eps,
                           std::size_t keep_worst) {
  if (params.size() != analytic.size()) {
    throw ConfigError("gradient check requires matching parameter and gradient lists");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorView& p = params[i];
    const TensorView& a = analytic[i];
    if (p.rows != a.rows || p.cols != a.cols) {
      throw ConfigError("gradient shape mismatch for " + p.name);
    }
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double orig = p.data[j];
      p.data[j] = orig + eps;
      const double lp = loss_fn();
      p.data[j] = orig - eps;
      const double lm = loss_fn();
      p.data[j] = orig;

      GradCheckEntry e;
      e.tensor = p.name;
      e.index = j;
      e.analytic = a.data[j];
      e.numeric = (lp - lm) / (2.0 * eps);
      e.rel_err = std::abs(e.analytic - e.numeric) /
                  std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-6});
      report.entries_checked += 1;
      report.max_rel_err = std::max(report.max_rel_err, e.rel_err);

      auto pos = std::find_if(report.worst.begin(), report.worst.end(),
                              [&](const GradCheckEntry& w) { return e.rel_err > w.rel_err; });
      report.worst.insert(pos, e);
      if (report.worst.size() > keep_worst) report.worst.pop_back();
    }
  }
  return report;
}

}  // namespace skilleval
