#ifndef STYLETTS_NN_RECURRENT_HPP_
#define STYLETTS_NN_RECURRENT_HPP_

#include <string>
#include <vector>

#include "styletts/nn/param.hpp"

namespace styletts::nn {

// Sequences are packed time-major: row t * batch + b holds step t of
// sequence b. A T x batch mask marks valid steps; on masked steps the state
// is carried through unchanged, so the last block holds each sequence's
// final state.
struct SequenceBatch {
  Matrix data;  // (T * batch) x D
  Matrix mask;  // T x batch
  int batch = 1;

  int steps() const { return static_cast<int>(mask.rows()); }
  static SequenceBatch single(const Matrix& seq);
  static SequenceBatch pack(const std::vector<const Matrix*>& seqs, int dim);
};

struct GruCache {
  Matrix x;
  Matrix h_prev;  // (T * batch) x H, state entering step t
  Matrix r, z, n, hn;
};

// Gated recurrent unit, gate order (reset, update, candidate).
class Gru {
 public:
  Gru() = default;
  Gru(std::string name, int in, int hidden, Rng& rng);

  int in_dim() const { return static_cast<int>(w_x_.value.cols()); }
  int hidden() const { return static_cast<int>(w_h_.value.cols()); }

  // Returns all states, (T * batch) x H.
  Matrix forward(const SequenceBatch& seq, GruCache* cache) const;
  // One inference step for a single sequence.
  RowVector step(const RowVector& x, const RowVector& h) const;
  // d_states: gradient w.r.t. every returned state. Returns d input.
  Matrix backward(const SequenceBatch& seq, const GruCache& cache, const Matrix& d_states);
  void collect(ParamList& out);

 private:
  Param w_x_, w_h_, b_x_, b_h_;
};

struct LstmCache {
  Matrix x;
  Matrix h_prev, c_prev;
  Matrix i, f, g, o, c, tanh_c;
};

// Long short-term memory layer, gate order (input, forget, cell, output).
class Lstm {
 public:
  Lstm() = default;
  Lstm(std::string name, int in, int hidden, Rng& rng);

  int in_dim() const { return static_cast<int>(w_x_.value.cols()); }
  int hidden() const { return static_cast<int>(w_h_.value.cols()); }

  Matrix forward(const SequenceBatch& seq, LstmCache* cache) const;
  Matrix backward(const SequenceBatch& seq, const LstmCache& cache, const Matrix& d_states);
  void collect(ParamList& out);

 private:
  Param w_x_, w_h_, b_;
};

// Final state of each sequence: the last time block of `states`.
Matrix last_states(const Matrix& states, int batch);

}  // namespace styletts::nn

#endif  // STYLETTS_NN_RECURRENT_HPP_
