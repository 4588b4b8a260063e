#include "styletts/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include "styletts/error.hpp"

namespace styletts::nn {

Param::Param(std::string n, Matrix init)
    : name(std::move(n)),
      value(std::move(init)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      m(Matrix::Zero(value.rows(), value.cols())),
      v(Matrix::Zero(value.rows(), value.cols())) {}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return uniform_init(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

double grad_norm(const ParamList& params) {
  double s = 0.0;
  for (const Param* p : params) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

std::uint64_t checksum(const ParamList& params) {
  std::uint64_t h = 14695981039346656037ull;
  for (const Param* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    const auto n = static_cast<std::size_t>(p->value.size()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

Dense::Dense(std::string name, int in, int out, Rng& rng)
    : weight_(name + ".weight", xavier_init(out, in, rng)), bias_(name + ".bias", Matrix::Zero(1, out)) {}

Matrix Dense::forward(const Matrix& x) const {
  if (x.cols() != weight_.value.cols()) {
    throw ShapeError("dense " + weight_.name + ": expected input width " + std::to_string(weight_.value.cols()) +
                     ", got " + std::to_string(x.cols()));
  }
  Matrix y = x * weight_.value.transpose();
  y.rowwise() += bias_.value.row(0);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy) {
  weight_.grad.noalias() += dy.transpose() * x;
  bias_.grad += dy.colwise().sum();
  return dy * weight_.value;
}

void Dense::collect(ParamList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Matrix tanh_forward(const Matrix& x) { return x.array().tanh().matrix(); }

Matrix tanh_backward(const Matrix& y, const Matrix& dy) {
  return (dy.array() * (1.0 - y.array().square())).matrix();
}

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

BatchNorm::BatchNorm(std::string name, int features, double momentum, double eps)
    : gamma_(name + ".gamma", Matrix::Ones(1, features)),
      beta_(name + ".beta", Matrix::Zero(1, features)),
      running_mean_(RowVector::Zero(features)),
      running_var_(RowVector::Ones(features)),
      momentum_(momentum),
      eps_(eps) {}

Matrix BatchNorm::forward_train(const Matrix& x, BatchNormCache* cache) {
  const auto n = static_cast<double>(x.rows());
  if (x.rows() < 2) throw Error("batch norm training needs at least two samples");
  if (x.cols() != features()) throw ShapeError("batch norm: feature width mismatch");
  const RowVector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  const RowVector var = centered.array().square().colwise().sum().matrix() / n;
  const RowVector inv_std = (var.array() + eps_).rsqrt().matrix();
  Matrix x_hat = centered.array().rowwise() * inv_std.array();
  Matrix y = (x_hat.array().rowwise() * gamma_.value.row(0).array()).matrix();
  y.rowwise() += beta_.value.row(0);
  running_mean_ = momentum_ * running_mean_ + (1.0 - momentum_) * mean;
  running_var_ = momentum_ * running_var_ + (1.0 - momentum_) * var * (n / (n - 1.0));
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = inv_std;
  }
  return y;
}

Matrix BatchNorm::forward_inference(const Matrix& x) const {
  if (x.cols() != features()) throw ShapeError("batch norm: feature width mismatch");
  const RowVector inv_std = (running_var_.array() + eps_).rsqrt().matrix();
  const RowVector scale = (gamma_.value.row(0).array() * inv_std.array()).matrix();
  Matrix y = ((x.rowwise() - running_mean_).array().rowwise() * scale.array()).matrix();
  y.rowwise() += beta_.value.row(0);
  return y;
}

Matrix BatchNorm::backward(const BatchNormCache& cache, const Matrix& dy) {
  const auto n = static_cast<double>(dy.rows());
  gamma_.grad += (dy.array() * cache.x_hat.array()).colwise().sum().matrix();
  beta_.grad += dy.colwise().sum();
  const Matrix dx_hat = dy.array().rowwise() * gamma_.value.row(0).array();
  const RowVector sum_dx = dx_hat.colwise().sum();
  const RowVector sum_dx_xhat = (dx_hat.array() * cache.x_hat.array()).colwise().sum().matrix();
  Matrix dx = (n * dx_hat).rowwise() - sum_dx;
  dx -= (cache.x_hat.array().rowwise() * sum_dx_xhat.array()).matrix();
  dx = (dx.array().rowwise() * (cache.inv_std.array() / n)).matrix();
  return dx;
}

void BatchNorm::collect(ParamList& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

double weighted_softmax_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                      std::span<const double> class_weights, Matrix* grad) {
  const auto n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("loss: label count mismatch");
  if (n == 0) throw Error("loss: empty batch");
  const Matrix p = softmax_rows(logits);
  double loss = 0.0;
  if (grad) *grad = Matrix::Zero(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw Error("loss: label out of range");
    const double w = class_weights[static_cast<std::size_t>(y)];
    if (!(w > 0.0)) throw Error("loss: label " + std::to_string(y) + " has zero class weight");
    // log-sum-exp form stays finite for extreme logits.
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += w * (lse - logits(i, y));
    if (grad) {
      grad->row(i) = w * p.row(i);
      (*grad)(i, y) -= w;
    }
  }
  if (grad) *grad /= static_cast<double>(n);
  return loss / static_cast<double>(n);
}

double masked_mse(const Matrix& pred, const Matrix& target, const Matrix& mask, Matrix* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mse: shape mismatch");
  const bool use_mask = mask.size() > 0;
  if (use_mask && (mask.rows() != pred.rows() || mask.cols() != pred.cols())) {
    throw ShapeError("mse: mask shape mismatch");
  }
  Matrix diff = pred - target;
  if (use_mask) diff = diff.cwiseProduct(mask);
  const double count = use_mask ? mask.sum() : static_cast<double>(pred.size());
  if (grad) *grad = count > 0 ? Matrix(2.0 * diff / count) : Matrix(Matrix::Zero(pred.rows(), pred.cols()));
  return count > 0 ? diff.squaredNorm() / count : 0.0;
}

}  // namespace styletts::nn
