#include "styletts/nn/recurrent.hpp"

#include <algorithm>
#include <cmath>

#include "styletts/error.hpp"
#include "styletts/nn/layers.hpp"

namespace styletts::nn {

SequenceBatch SequenceBatch::single(const Matrix& seq) {
  SequenceBatch s;
  s.data = seq;
  s.mask = Matrix::Ones(seq.rows(), 1);
  s.batch = 1;
  return s;
}

SequenceBatch SequenceBatch::pack(const std::vector<const Matrix*>& seqs, int dim) {
  SequenceBatch s;
  s.batch = static_cast<int>(seqs.size());
  Eigen::Index t_max = 0;
  for (const Matrix* m : seqs) t_max = std::max(t_max, m->rows());
  // Zero-length sequences still need one (masked) step so states exist.
  t_max = std::max<Eigen::Index>(t_max, 1);
  s.data = Matrix::Zero(t_max * s.batch, dim);
  s.mask = Matrix::Zero(t_max, s.batch);
  for (int b = 0; b < s.batch; ++b) {
    const Matrix& m = *seqs[static_cast<std::size_t>(b)];
    if (m.rows() > 0 && m.cols() != dim) throw ShapeError("pack: sequence width mismatch");
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      s.data.row(t * s.batch + b) = m.row(t);
      s.mask(t, b) = 1.0;
    }
  }
  return s;
}

Matrix last_states(const Matrix& states, int batch) {
  return states.bottomRows(batch);
}

namespace {

void check_input(const SequenceBatch& seq, int in_dim, const std::string& name) {
  if (seq.data.cols() != in_dim) {
    throw ShapeError(name + ": expected input width " + std::to_string(in_dim) + ", got " +
                     std::to_string(seq.data.cols()));
  }
  if (seq.data.rows() != static_cast<Eigen::Index>(seq.steps()) * seq.batch) {
    throw ShapeError(name + ": packed rows do not match mask");
  }
}

}  // namespace

Gru::Gru(std::string name, int in, int hidden, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_x_ = Param(name + ".w_x", uniform_init(3 * hidden, in, k, rng));
  w_h_ = Param(name + ".w_h", uniform_init(3 * hidden, hidden, k, rng));
  b_x_ = Param(name + ".b_x", uniform_init(1, 3 * hidden, k, rng));
  b_h_ = Param(name + ".b_h", uniform_init(1, 3 * hidden, k, rng));
}

Matrix Gru::forward(const SequenceBatch& seq, GruCache* cache) const {
  check_input(seq, in_dim(), w_x_.name);
  const int H = hidden();
  const int B = seq.batch;
  const int T = seq.steps();
  Matrix gx = seq.data * w_x_.value.transpose();
  gx.rowwise() += b_x_.value.row(0);
  Matrix states(static_cast<Eigen::Index>(T) * B, H);
  if (cache) {
    cache->x = seq.data;
    cache->h_prev.resize(states.rows(), H);
    cache->r.resize(states.rows(), H);
    cache->z.resize(states.rows(), H);
    cache->n.resize(states.rows(), H);
    cache->hn.resize(states.rows(), H);
  }
  Matrix h = Matrix::Zero(B, H);
  for (int t = 0; t < T; ++t) {
    const Eigen::Index row = static_cast<Eigen::Index>(t) * B;
    Matrix gh = h * w_h_.value.transpose();
    gh.rowwise() += b_h_.value.row(0);
    const auto gxt = gx.middleRows(row, B);
    const Matrix r = sigmoid(gxt.leftCols(H) + gh.leftCols(H));
    const Matrix z = sigmoid(gxt.middleCols(H, H) + gh.middleCols(H, H));
    const Matrix hn = gh.rightCols(H);
    const Matrix n = (gxt.rightCols(H).array() + r.array() * hn.array()).tanh().matrix();
    Matrix h_new = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
    for (int b = 0; b < B; ++b) {
      if (seq.mask(t, b) == 0.0) h_new.row(b) = h.row(b);
    }
    if (cache) {
      cache->h_prev.middleRows(row, B) = h;
      cache->r.middleRows(row, B) = r;
      cache->z.middleRows(row, B) = z;
      cache->n.middleRows(row, B) = n;
      cache->hn.middleRows(row, B) = hn;
    }
    h = std::move(h_new);
    states.middleRows(row, B) = h;
  }
  return states;
}

RowVector Gru::step(const RowVector& x, const RowVector& h) const {
  const int H = hidden();
  const RowVector gx = x * w_x_.value.transpose() + b_x_.value.row(0);
  const RowVector gh = h * w_h_.value.transpose() + b_h_.value.row(0);
  const RowVector r = sigmoid(gx.head(H) + gh.head(H));
  const RowVector z = sigmoid(gx.segment(H, H) + gh.segment(H, H));
  const RowVector n = (gx.tail(H).array() + r.array() * gh.tail(H).array()).tanh().matrix();
  return ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
}

Matrix Gru::backward(const SequenceBatch& seq, const GruCache& cache, const Matrix& d_states) {
  const int H = hidden();
  const int B = seq.batch;
  const int T = seq.steps();
  Matrix d_gx(static_cast<Eigen::Index>(T) * B, 3 * H);
  Matrix d_gh(B, 3 * H);
  Matrix carry = Matrix::Zero(B, H);
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::Index row = static_cast<Eigen::Index>(t) * B;
    Matrix dh = d_states.middleRows(row, B) + carry;
    Matrix d_pass = Matrix::Zero(B, H);
    for (int b = 0; b < B; ++b) {
      if (seq.mask(t, b) == 0.0) {
        d_pass.row(b) = dh.row(b);
        dh.row(b).setZero();
      }
    }
    const auto r = cache.r.middleRows(row, B).array();
    const auto z = cache.z.middleRows(row, B).array();
    const auto n = cache.n.middleRows(row, B).array();
    const auto hn = cache.hn.middleRows(row, B).array();
    const auto h_prev = cache.h_prev.middleRows(row, B);
    const auto dha = dh.array();
    const Eigen::ArrayXXd da_n = dha * (1.0 - z) * (1.0 - n.square());
    const Eigen::ArrayXXd da_z = dha * (h_prev.array() - n) * z * (1.0 - z);
    const Eigen::ArrayXXd da_r = da_n * hn * r * (1.0 - r);
    d_gx.middleRows(row, B) << da_r.matrix(), da_z.matrix(), da_n.matrix();
    d_gh << da_r.matrix(), da_z.matrix(), (da_n * r).matrix();
    w_h_.grad.noalias() += d_gh.transpose() * h_prev;
    b_h_.grad += d_gh.colwise().sum();
    carry = (dha * z).matrix() + d_gh * w_h_.value + d_pass;
  }
  w_x_.grad.noalias() += d_gx.transpose() * cache.x;
  b_x_.grad += d_gx.colwise().sum();
  return d_gx * w_x_.value;
}

void Gru::collect(ParamList& out) {
  out.push_back(&w_x_);
  out.push_back(&w_h_);
  out.push_back(&b_x_);
  out.push_back(&b_h_);
}

Lstm::Lstm(std::string name, int in, int hidden, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_x_ = Param(name + ".w_x", uniform_init(4 * hidden, in, k, rng));
  w_h_ = Param(name + ".w_h", uniform_init(4 * hidden, hidden, k, rng));
  Matrix b = uniform_init(1, 4 * hidden, k, rng);
  b.middleCols(hidden, hidden).array() += 1.0;  // forget-gate bias
  b_ = Param(name + ".b", b);
}

Matrix Lstm::forward(const SequenceBatch& seq, LstmCache* cache) const {
  check_input(seq, in_dim(), w_x_.name);
  const int H = hidden();
  const int B = seq.batch;
  const int T = seq.steps();
  Matrix gx = seq.data * w_x_.value.transpose();
  gx.rowwise() += b_.value.row(0);
  const Eigen::Index rows = static_cast<Eigen::Index>(T) * B;
  Matrix states(rows, H);
  if (cache) {
    cache->x = seq.data;
    for (Matrix* m : {&cache->h_prev, &cache->c_prev, &cache->i, &cache->f, &cache->g, &cache->o, &cache->c,
                      &cache->tanh_c}) {
      m->resize(rows, H);
    }
  }
  Matrix h = Matrix::Zero(B, H);
  Matrix c = Matrix::Zero(B, H);
  for (int t = 0; t < T; ++t) {
    const Eigen::Index row = static_cast<Eigen::Index>(t) * B;
    const Matrix a = gx.middleRows(row, B) + h * w_h_.value.transpose();
    const Matrix i = sigmoid(a.leftCols(H));
    const Matrix f = sigmoid(a.middleCols(H, H));
    const Matrix g = a.middleCols(2 * H, H).array().tanh().matrix();
    const Matrix o = sigmoid(a.rightCols(H));
    Matrix c_new = (f.array() * c.array() + i.array() * g.array()).matrix();
    const Matrix tc = c_new.array().tanh().matrix();
    Matrix h_new = (o.array() * tc.array()).matrix();
    for (int b = 0; b < B; ++b) {
      if (seq.mask(t, b) == 0.0) {
        h_new.row(b) = h.row(b);
        c_new.row(b) = c.row(b);
      }
    }
    if (cache) {
      cache->h_prev.middleRows(row, B) = h;
      cache->c_prev.middleRows(row, B) = c;
      cache->i.middleRows(row, B) = i;
      cache->f.middleRows(row, B) = f;
      cache->g.middleRows(row, B) = g;
      cache->o.middleRows(row, B) = o;
      cache->c.middleRows(row, B) = c_new;
      cache->tanh_c.middleRows(row, B) = tc;
    }
    h = std::move(h_new);
    c = std::move(c_new);
    states.middleRows(row, B) = h;
  }
  return states;
}

Matrix Lstm::backward(const SequenceBatch& seq, const LstmCache& cache, const Matrix& d_states) {
  const int H = hidden();
  const int B = seq.batch;
  const int T = seq.steps();
  Matrix d_a(static_cast<Eigen::Index>(T) * B, 4 * H);
  Matrix dh_carry = Matrix::Zero(B, H);
  Matrix dc_carry = Matrix::Zero(B, H);
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::Index row = static_cast<Eigen::Index>(t) * B;
    Matrix dh = d_states.middleRows(row, B) + dh_carry;
    Matrix dc = dc_carry;
    Matrix pass_h = Matrix::Zero(B, H);
    Matrix pass_c = Matrix::Zero(B, H);
    for (int b = 0; b < B; ++b) {
      if (seq.mask(t, b) == 0.0) {
        pass_h.row(b) = dh.row(b);
        pass_c.row(b) = dc.row(b);
        dh.row(b).setZero();
        dc.row(b).setZero();
      }
    }
    const auto i = cache.i.middleRows(row, B).array();
    const auto f = cache.f.middleRows(row, B).array();
    const auto g = cache.g.middleRows(row, B).array();
    const auto o = cache.o.middleRows(row, B).array();
    const auto tc = cache.tanh_c.middleRows(row, B).array();
    const auto c_prev = cache.c_prev.middleRows(row, B).array();
    const Eigen::ArrayXXd dct = dc.array() + dh.array() * o * (1.0 - tc.square());
    const Eigen::ArrayXXd da_i = dct * g * i * (1.0 - i);
    const Eigen::ArrayXXd da_f = dct * c_prev * f * (1.0 - f);
    const Eigen::ArrayXXd da_g = dct * i * (1.0 - g.square());
    const Eigen::ArrayXXd da_o = dh.array() * tc * o * (1.0 - o);
    d_a.middleRows(row, B) << da_i.matrix(), da_f.matrix(), da_g.matrix(), da_o.matrix();
    const auto d_at = d_a.middleRows(row, B);
    w_h_.grad.noalias() += d_at.transpose() * cache.h_prev.middleRows(row, B);
    dh_carry = d_at * w_h_.value + pass_h;
    dc_carry = (dct * f).matrix() + pass_c;
  }
  w_x_.grad.noalias() += d_a.transpose() * cache.x;
  b_.grad += d_a.colwise().sum();
  return d_a * w_x_.value;
}

void Lstm::collect(ParamList& out) {
  out.push_back(&w_x_);
  out.push_back(&w_h_);
  out.push_back(&b_);
}

}  // namespace styletts::nn
