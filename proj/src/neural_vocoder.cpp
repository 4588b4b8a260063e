#include "styletts/neural_vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

#include "styletts/error.hpp"
#include "styletts/features.hpp"
#include "styletts/nn/optim.hpp"
#include "styletts/pitch.hpp"
#include "styletts/vocoder.hpp"

namespace styletts::tts {

using nlohmann::json;

namespace {

NeuralVocoderConfig checked(const NeuralVocoderConfig& cfg) {
  if (cfg.hidden <= 0) throw Error("neural vocoder hidden size must be positive");
  if (cfg.chunk <= 0 || cfg.batch_size <= 0 || cfg.sample_rate <= 0) throw Error("invalid neural vocoder config");
  return cfg;
}

// Rows of (previous sample, conditioning) and the mu-law targets.
void teacher_inputs(const NeuralVocoder& m, const VocoderExample& ex, Matrix* inputs, std::vector<int>* targets) {
  const Matrix cond = m.conditioning(ex.frames, ex.f0);
  const auto n = cond.rows();
  inputs->resize(n, 1 + NeuralVocoder::kCondDim);
  targets->resize(static_cast<std::size_t>(n));
  double prev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = static_cast<std::size_t>(i) < ex.audio.size() ? ex.audio.samples[static_cast<std::size_t>(i)] : 0.0;
    const int q = mulaw_encode(s);
    (*inputs)(i, 0) = prev;
    inputs->row(i).tail(NeuralVocoder::kCondDim) = cond.row(i);
    (*targets)[static_cast<std::size_t>(i)] = q;
    prev = mulaw_decode(q);
  }
}

}  // namespace

VocoderExample make_vocoder_example(const Waveform& audio) {
  VocoderExample ex;
  const auto cep = corpus::extract_cepstra(audio);
  ex.frames.mfcc = cep;
  auto f0 = estimate_f0(audio);
  f0.resize(static_cast<std::size_t>(cep.rows()), 0.0);
  ex.f0 = std::move(f0);
  ex.audio = audio;
  return ex;
}

NeuralVocoder::NeuralVocoder(const NeuralVocoderConfig& cfg)
    : cfg_(checked(cfg)),
      cond_mean_(Eigen::RowVectorXd::Zero(kCondDim)),
      cond_std_(Eigen::RowVectorXd::Ones(kCondDim)) {
  nn::Rng rng(cfg.seed);
  rnn_ = nn::Gru("vocoder.rnn", 1 + kCondDim, cfg.hidden, rng);
  out_ = nn::Dense("vocoder.out", cfg.hidden, kMuLawLevels, rng);
}

Matrix NeuralVocoder::conditioning(const AcousticFrames& frames, const std::vector<double>& f0) const {
  frames.validate();
  if (static_cast<std::size_t>(frames.frames()) != f0.size()) {
    throw ShapeError("neural vocoder: frame count and f0 length differ");
  }
  const int hop = cfg_.framing.hop_samples(cfg_.sample_rate);
  const int win = cfg_.framing.window_samples(cfg_.sample_rate);
  const int t_max = frames.frames();
  Matrix cond(static_cast<Eigen::Index>(t_max) * hop, kCondDim);
  for (Eigen::Index n = 0; n < cond.rows(); ++n) {
    const long t = std::clamp<long>((static_cast<long>(n) - win / 2 + hop / 2) / hop, 0, t_max - 1);
    cond.row(n).head(kAcousticDim) = frames.mfcc.row(t);
    const double hz = f0[static_cast<std::size_t>(t)];
    cond(n, kAcousticDim) = hz / kMaxF0;
    cond(n, kAcousticDim + 1) = hz > 0.0 ? 1.0 : 0.0;
  }
  cond.rowwise() -= cond_mean_;
  cond = (cond.array().rowwise() / cond_std_.array()).matrix();
  return cond;
}

double NeuralVocoder::accumulate_gradients(const std::vector<const Matrix*>& inputs,
                                           const std::vector<std::vector<int>>& targets) {
  const auto seq = nn::SequenceBatch::pack(inputs, 1 + kCondDim);
  nn::GruCache cache;
  const Matrix states = rnn_.forward(seq, &cache);
  const int b = seq.batch;
  // Only valid steps enter the loss.
  std::vector<Eigen::Index> rows;
  std::vector<int> labels;
  for (int t = 0; t < seq.steps(); ++t) {
    for (int k = 0; k < b; ++k) {
      if (seq.mask(t, k) == 0.0) continue;
      rows.push_back(static_cast<Eigen::Index>(t) * b + k);
      labels.push_back(targets[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]);
    }
  }
  Matrix h(static_cast<Eigen::Index>(rows.size()), rnn_.hidden());
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = states.row(rows[i]);
  const Matrix logits = out_.forward(h);
  const std::vector<double> ones(kMuLawLevels, 1.0);
  Matrix d_logits;
  const double l = nn::weighted_softmax_cross_entropy(logits, labels, ones, &d_logits);
  const Matrix d_h = out_.backward(h, d_logits);
  Matrix d_states = Matrix::Zero(states.rows(), states.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) d_states.row(rows[i]) = d_h.row(static_cast<Eigen::Index>(i));
  rnn_.backward(seq, cache, d_states);
  return l;
}

double NeuralVocoder::loss(const Matrix& inputs, const std::vector<int>& targets) const {
  const Matrix states = rnn_.forward(nn::SequenceBatch::single(inputs), nullptr);
  const std::vector<double> ones(kMuLawLevels, 1.0);
  return nn::weighted_softmax_cross_entropy(out_.forward(states), targets, ones, nullptr);
}

Waveform NeuralVocoder::generate(const AcousticFrames& frames, const std::vector<double>& f0,
                                 std::uint64_t seed) const {
  const Matrix cond = conditioning(frames, f0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Waveform wave;
  wave.rate = cfg_.sample_rate;
  wave.samples.resize(static_cast<std::size_t>(cond.rows()));
  nn::RowVector h = nn::RowVector::Zero(rnn_.hidden());
  nn::RowVector x(1 + kCondDim);
  double prev = 0.0;
  for (Eigen::Index n = 0; n < cond.rows(); ++n) {
    x(0) = prev;
    x.tail(kCondDim) = cond.row(n);
    h = rnn_.step(x, h);
    const nn::RowVector p = nn::softmax_rows(out_.forward(h)).row(0);
    const double u = uni(rng);
    double acc = 0.0;
    int q = kMuLawLevels - 1;
    for (int k = 0; k < kMuLawLevels; ++k) {
      acc += p(k);
      if (u < acc) {
        q = k;
        break;
      }
    }
    prev = mulaw_decode(q);
    wave.samples[static_cast<std::size_t>(n)] = prev;
  }
  wave.clamp();
  return wave;
}

nn::ParamList NeuralVocoder::params() {
  nn::ParamList p;
  rnn_.collect(p);
  out_.collect(p);
  return p;
}

nn::Checkpoint NeuralVocoder::to_checkpoint() const {
  nn::Checkpoint c;
  c.kind = "neural_vocoder";
  c.config = json{{"hidden", cfg_.hidden},
                  {"sample_rate", cfg_.sample_rate},
                  {"window_ms", cfg_.framing.window_ms},
                  {"hop_ms", cfg_.framing.hop_ms},
                  {"seed", cfg_.seed}}
                 .dump();
  c.put(const_cast<NeuralVocoder*>(this)->params());
  c.tensors["vocoder.cond_mean"] = cond_mean_;
  c.tensors["vocoder.cond_std"] = cond_std_;
  return c;
}

NeuralVocoder NeuralVocoder::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "neural_vocoder") throw ParseError("checkpoint is not a neural vocoder");
  const auto j = json::parse(ckpt.config);
  NeuralVocoderConfig cfg;
  cfg.hidden = j.at("hidden").get<int>();
  cfg.sample_rate = j.at("sample_rate").get<int>();
  cfg.framing.window_ms = j.at("window_ms").get<double>();
  cfg.framing.hop_ms = j.at("hop_ms").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  NeuralVocoder m(cfg);
  ckpt.get(m.params());
  m.cond_mean_ = ckpt.tensor("vocoder.cond_mean").row(0);
  m.cond_std_ = ckpt.tensor("vocoder.cond_std").row(0);
  return m;
}

void NeuralVocoder::save(const std::filesystem::path& path) const { to_checkpoint().save(path); }

NeuralVocoder NeuralVocoder::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::Checkpoint::load(path, "neural_vocoder"));
}

NeuralVocoderResult train_neural_vocoder(const std::vector<VocoderExample>& data, const NeuralVocoderConfig& cfg) {
  NeuralVocoder model(cfg);
  if (data.empty()) throw Error("train_neural_vocoder: no training data");
  for (const auto& ex : data) {
    if (ex.audio.rate != cfg.sample_rate) throw Error("train_neural_vocoder: sample rate mismatch");
  }

  // Conditioning statistics over all frames.
  {
    std::vector<Matrix> raw;
    Eigen::Index rows = 0;
    for (const auto& ex : data) {
      raw.push_back(model.conditioning(ex.frames, ex.f0));
      rows += raw.back().rows();
    }
    Matrix all(rows, NeuralVocoder::kCondDim);
    Eigen::Index r = 0;
    for (const auto& m : raw) {
      all.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    const Eigen::RowVectorXd mean = all.colwise().mean();
    const Eigen::RowVectorXd var = (all.rowwise() - mean).array().square().colwise().mean();
    model.cond_mean() = mean;
    model.cond_std() = var.array().sqrt().max(1e-3).matrix();
  }

  // Truncated chunks with teacher-forced inputs.
  std::vector<Matrix> chunks;
  std::vector<std::vector<int>> chunk_targets;
  for (const auto& ex : data) {
    Matrix in;
    std::vector<int> tg;
    teacher_inputs(model, ex, &in, &tg);
    for (Eigen::Index s = 0; s < in.rows(); s += cfg.chunk) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.chunk, in.rows() - s);
      chunks.push_back(in.middleRows(s, len));
      chunk_targets.emplace_back(tg.begin() + s, tg.begin() + s + len);
    }
  }

  auto mean_loss = [&]() {
    double total = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const double n = static_cast<double>(chunks[i].rows());
      total += model.loss(chunks[i], chunk_targets[i]) * n;
      count += n;
    }
    return total / count;
  };

  NeuralVocoderResult result{model, {}};
  result.loss_history.push_back(mean_loss());
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;
  nn::Adam adam(adam_cfg);
  nn::Rng rng(cfg.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    double count = 0.0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Matrix*> in;
      std::vector<std::vector<int>> tg;
      double n = 0.0;
      for (std::size_t k = s; k < std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size)); ++k) {
        in.push_back(&chunks[order[k]]);
        tg.push_back(chunk_targets[order[k]]);
        n += static_cast<double>(chunks[order[k]].rows());
      }
      const auto params = model.params();
      nn::zero_grads(params);
      total += model.accumulate_gradients(in, tg) * n;
      count += n;
      adam.step(params);
    }
    result.loss_history.push_back(total / count);
  }
  result.model = std::move(model);
  return result;
}

Waveform vocode_neural(const NeuralVocoder& model, const AcousticFrames& frames, const std::vector<double>& f0,
                       std::uint64_t seed) {
  return model.generate(frames, f0, seed);
}

std::vector<VocoderExample> sine_corpus(int count, double seconds, int sample_rate, std::uint64_t seed) {
  if (count <= 0 || seconds <= 0.0) throw Error("sine_corpus: count and duration must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hz(100.0, 300.0);
  std::uniform_real_distribution<double> amp(0.3, 0.7);
  std::vector<VocoderExample> out;
  for (int i = 0; i < count; ++i) {
    const double f = hz(rng);
    const double a = amp(rng);
    Waveform w;
    w.rate = sample_rate;
    w.samples.resize(static_cast<std::size_t>(seconds * sample_rate));
    for (std::size_t n = 0; n < w.samples.size(); ++n) {
      w.samples[n] = a * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / sample_rate);
    }
    out.push_back(make_vocoder_example(w));
  }
  return out;
}

}  // namespace styletts::tts
