#include "styletts/nn/optim.hpp"

#include <cmath>

namespace styletts::nn {

void Adam::step(const ParamList& params) {
  ++t_;
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const double norm = grad_norm(params);
    if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    const Matrix g = p->grad * scale;
    p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * g;
    p->v = cfg_.beta2 * p->v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p->value.array() -= cfg_.lr * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + cfg_.eps);
    p->zero_grad();
  }
}

}  // namespace styletts::nn
