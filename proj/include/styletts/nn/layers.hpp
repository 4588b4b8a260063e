#ifndef STYLETTS_NN_LAYERS_HPP_
#define STYLETTS_NN_LAYERS_HPP_

#include <span>
#include <string>

#include "styletts/nn/param.hpp"

namespace styletts::nn {

// y = x W^T + b, rows are samples.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int in, int out, Rng& rng);

  int in_dim() const { return static_cast<int>(weight_.value.cols()); }
  int out_dim() const { return static_cast<int>(weight_.value.rows()); }

  Matrix forward(const Matrix& x) const;
  // Accumulates parameter gradients; returns dL/dx for the cached input.
  Matrix backward(const Matrix& x, const Matrix& dy);
  void collect(ParamList& out);

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  Param weight_;
  Param bias_;
};

Matrix tanh_forward(const Matrix& x);
// dy * (1 - y^2) given the activation output y.
Matrix tanh_backward(const Matrix& y, const Matrix& dy);
Matrix sigmoid(const Matrix& x);

struct BatchNormCache {
  Matrix x_hat;
  RowVector inv_std;
};

// Per-feature batch normalization. Running statistics are not trainable;
// they follow running = momentum * running + (1 - momentum) * batch.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, int features, double momentum = 0.9, double eps = 1e-5);

  int features() const { return static_cast<int>(gamma_.value.cols()); }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }

  // Training mode: normalizes with batch statistics, fills cache and updates
  // running statistics. Needs at least two rows.
  Matrix forward_train(const Matrix& x, BatchNormCache* cache);
  Matrix forward_inference(const Matrix& x) const;
  Matrix backward(const BatchNormCache& cache, const Matrix& dy);
  void collect(ParamList& out);

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  const Param& gamma() const { return gamma_; }
  const Param& beta() const { return beta_; }
  RowVector& running_mean() { return running_mean_; }
  RowVector& running_var() { return running_var_; }
  const RowVector& running_mean() const { return running_mean_; }
  const RowVector& running_var() const { return running_var_; }

 private:
  Param gamma_;
  Param beta_;
  RowVector running_mean_;
  RowVector running_var_;
  double momentum_ = 0.9;
  double eps_ = 1e-5;
};

Matrix softmax_rows(const Matrix& logits);

// Mean over rows of weights[label] * -log softmax(logits)[label]. Writes
// dL/dlogits when grad is non-null.
double weighted_softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                      std::span<const double> class_weights, Matrix* grad);

// Mean squared error over entries where mask is 1 (mask may be empty for all).
double masked_mse(const Matrix& pred, const Matrix& target, const Matrix& mask, Matrix* grad);

}  // namespace styletts::nn

#endif  // STYLETTS_NN_LAYERS_HPP_
