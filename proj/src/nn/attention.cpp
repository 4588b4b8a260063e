#include "styletts/nn/attention.hpp"

#include "styletts/error.hpp"
#include "styletts/nn/layers.hpp"

namespace styletts::nn {

GlobalAttention::GlobalAttention(std::string name, int query_dim, int memory_dim, Rng& rng)
    : w_(name + ".w", xavier_init(query_dim, memory_dim, rng)) {}

Matrix GlobalAttention::forward(const Matrix& query, const Matrix& memory, AttentionCache* cache) const {
  if (query.cols() != query_dim() || memory.cols() != memory_dim()) {
    throw ShapeError("attention " + w_.name + ": input width mismatch");
  }
  if (memory.rows() == 0) throw ShapeError("attention " + w_.name + ": empty memory");
  const Matrix scores = query * w_.value * memory.transpose();
  Matrix weights = softmax_rows(scores);
  Matrix context = weights * memory;
  if (cache) {
    cache->query = query;
    cache->memory = memory;
    cache->weights = std::move(weights);
  }
  return context;
}

Matrix GlobalAttention::backward(const AttentionCache& cache, const Matrix& d_context, Matrix* d_memory) {
  const Matrix& a = cache.weights;
  const Matrix d_a = d_context * cache.memory.transpose();
  const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
  const Matrix d_scores = (a.array() * (d_a.colwise() - row_dot).array()).matrix();
  const Matrix d_scores_mem = d_scores * cache.memory;  // T x M
  w_.grad.noalias() += cache.query.transpose() * d_scores_mem;
  if (d_memory) {
    *d_memory = a.transpose() * d_context + d_scores.transpose() * (cache.query * w_.value);
  }
  return d_scores_mem * w_.value.transpose();
}

void GlobalAttention::collect(ParamList& out) { out.push_back(&w_); }

}  // namespace styletts::nn
