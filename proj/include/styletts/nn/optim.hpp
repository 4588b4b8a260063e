#ifndef STYLETTS_NN_OPTIM_HPP_
#define STYLETTS_NN_OPTIM_HPP_

#include "styletts/nn/param.hpp"

namespace styletts::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables global-norm clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update from the accumulated gradients, then zeroes them.
  void step(const ParamList& params);
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace styletts::nn

#endif  // STYLETTS_NN_OPTIM_HPP_
