#ifndef STYLETTS_NN_ATTENTION_HPP_
#define STYLETTS_NN_ATTENTION_HPP_

#include <string>

#include "styletts/nn/param.hpp"

namespace styletts::nn {

struct AttentionCache {
  Matrix query;    // T x Q
  Matrix memory;   // L x M
  Matrix weights;  // T x L, softmax over memory positions
};

// Content-based global attention over a whole memory sequence:
// score(q, m) = q^T W m, weights = softmax over memory, context = sum w m.
class GlobalAttention {
 public:
  GlobalAttention() = default;
  GlobalAttention(std::string name, int query_dim, int memory_dim, Rng& rng);

  int query_dim() const { return static_cast<int>(w_.value.rows()); }
  int memory_dim() const { return static_cast<int>(w_.value.cols()); }

  // Returns T x M contexts.
  Matrix forward(const Matrix& query, const Matrix& memory, AttentionCache* cache) const;
  // Returns d query; d memory is written when requested.
  Matrix backward(const AttentionCache& cache, const Matrix& d_context, Matrix* d_memory = nullptr);
  void collect(ParamList& out);

 private:
  Param w_;
};

}  // namespace styletts::nn

#endif  // STYLETTS_NN_ATTENTION_HPP_
