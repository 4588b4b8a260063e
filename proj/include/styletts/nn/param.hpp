#ifndef STYLETTS_NN_PARAM_HPP_
#define STYLETTS_NN_PARAM_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace styletts::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

// A trainable tensor with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;

  Param() = default;
  Param(std::string n, Matrix init);

  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;

// Uniform(-limit, limit).
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng);
// Glorot uniform for a rows x cols weight.
Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

void zero_grads(const ParamList& params);
double grad_norm(const ParamList& params);
// Order-sensitive FNV-1a over the raw bytes of every value.
std::uint64_t checksum(const ParamList& params);

}  // namespace styletts::nn

#endif  // STYLETTS_NN_PARAM_HPP_
