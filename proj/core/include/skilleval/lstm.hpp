#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skilleval/tensor_io.hpp"

namespace skilleval {

// One LSTM layer. Gate weights are packed into a single matrix of shape
// 4H x (I + H) acting on [x_t; h_{t-1}], with rows ordered input gate,
// forget gate, output gate, candidate. The same struct doubles as gradient
// storage since gradients share the parameter shapes.
struct LstmLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;

  Eigen::Index hidden_dim() const { return w.rows() / 4; }
  Eigen::Index input_dim() const { return w.cols() - hidden_dim(); }
};

struct LstmStack {
  std::vector<LstmLayer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  Eigen::Index input_dim() const { return layers.front().input_dim(); }
  Eigen::Index hidden_dim() const { return layers.front().hidden_dim(); }
};

using LstmGradients = LstmStack;

// Weights uniform in +-1/sqrt(H), biases zero except the forget gate rows,
// which start at 1 so early training does not wipe the cell state.
LstmStack make_lstm(Eigen::Index input_dim, Eigen::Index hidden_dim, int depth,
                    std::uint64_t seed);

LstmGradients zero_gradients(const LstmStack& net);
void add_gradients(LstmGradients& acc, const LstmGradients& g);

// Everything the backward pass needs, kept per layer per timestep.
// Rows index time.
struct LstmCache {
  Eigen::MatrixXd input;  // T x input_dim
  struct LayerCache {
    Eigen::MatrixXd gi, gf, go, gg;  // gate activations, T x H
    Eigen::MatrixXd c, tanh_c, h;    // cell state, its tanh, hidden state
  };
  std::vector<LayerCache> layers;

  Eigen::Index steps() const { return input.rows(); }
  // Top-layer hidden states, T x H.
  const Eigen::MatrixXd& hidden() const { return layers.back().h; }
};

// Runs the stack over a T x input_dim sequence from zero initial state.
LstmCache lstm_forward(const LstmStack& net, const Eigen::MatrixXd& seq);

// Exact backpropagation through time. dh is the loss gradient on the
// top-layer hidden state at every step (T x H; zero rows where the loss
// does not touch a step). Returns freshly allocated parameter gradients;
// when d_input is non-null it receives dL/d(seq), T x input_dim.
LstmGradients lstm_backward(const LstmStack& net, const LstmCache& cache,
                            const Eigen::MatrixXd& dh,
                            Eigen::MatrixXd* d_input = nullptr);

// Ordered mutable views over all parameters, names like "layer0.w".
// Optimizer state, checkpoints and gradient checks share this order.
std::vector<TensorView> param_views(LstmStack& net, const std::string& prefix = "");

// Rebuilds a stack from consecutive "layer<l>.w"/"layer<l>.b" tensors of a
// checkpoint; dimensions come from the tensor shapes. where names the file
// in error messages.
LstmStack stack_from_tensors(const TensorFile& file, const std::string& where);

// Global-norm gradient clipping; returns the norm before clipping.
double clip_gradients(std::vector<TensorView> grads, double max_norm);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long step = 0;
};

AdamState make_adam_state(const std::vector<TensorView>& params);
void adam_step(std::vector<TensorView> params, const std::vector<TensorView>& grads,
               AdamState& state, const AdamOptions& opts);

// Central-difference gradient check over arbitrary parameter views.
// loss_fn must recompute the scalar loss from the current parameter values.
struct GradCheckEntry {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  Eigen::Index entries_checked = 0;
  std::vector<GradCheckEntry> worst;  // descending rel_err, capped

  bool pass(double tol) const { return max_rel_err <= tol; }
};

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::vector<TensorView> params,
                           const std::vector<TensorView>& analytic,
                           double eps = 1e-5, std::size_t keep_worst = 8);

}  // namespace skilleval
