#include "styletts/acoustic_model.hpp"

#include <json.hpp>

#include "styletts/error.hpp"

namespace styletts::tts {

using nlohmann::json;

void AcousticFrames::validate() const {
  if (mfcc.cols() != kAcousticDim) throw ShapeError("acoustic frames must be 13 wide");
  if (!mfcc.allFinite()) throw Error("acoustic frames contain non-finite values");
}

Matrix upsample_linguistic(const LinguisticSequence& ling, const std::vector<int>& durations) {
  if (durations.size() != ling.size()) throw ShapeError("durations do not match the phoneme count");
  int total = 0;
  for (int d : durations) {
    if (d < 1) throw Error("duration below one frame");
    total += d;
  }
  const auto dim = ling.features.cols();
  Matrix out(total, dim + 1);
  int row = 0;
  for (std::size_t p = 0; p < durations.size(); ++p) {
    const int d = durations[p];
    for (int k = 0; k < d; ++k, ++row) {
      out.row(row).head(dim) = ling.features.row(static_cast<Eigen::Index>(p));
      out(row, dim) = (k + 0.5) / d;
    }
  }
  return out;
}

AcousticModel::AcousticModel(const AcousticModelConfig& cfg)
    : cfg_(cfg),
      target_mean_(Eigen::RowVectorXd::Zero(kAcousticDim)),
      target_std_(Eigen::RowVectorXd::Ones(kAcousticDim)) {
  if (cfg.hidden <= 0 || cfg.layers <= 0 || cfg.speaker_dim < 0 || cfg.speakers.names.empty()) {
    throw Error("invalid acoustic model configuration");
  }
  nn::Rng rng(cfg.seed);
  speaker_table_ = nn::Param("acoustic.speaker", nn::uniform_init(static_cast<Eigen::Index>(cfg.speakers.names.size()),
                                                                  cfg.speaker_dim, 0.1, rng));
  int in = input_dim();
  for (int l = 0; l < cfg.layers; ++l) {
    layers_.emplace_back("acoustic.rnn" + std::to_string(l), in, cfg.hidden, rng);
    in = cfg.hidden;
  }
  out_ = nn::Dense("acoustic.out", cfg.hidden, kAcousticDim, rng);
}

// linguistic + position + [f0, voiced] + conditioning
int AcousticModel::input_dim() const { return linguistic_feature_dim() + 1 + 2 + conditioning_dim(); }

Matrix AcousticModel::build_inputs(const Matrix& frame_ling, const std::vector<double>& f0,
                                   const StyleEmbedding& style, int speaker) const {
  const int ling = linguistic_feature_dim() + 1;
  if (frame_ling.cols() != ling) throw ShapeError("acoustic model: frame features have the wrong width");
  if (static_cast<std::size_t>(frame_ling.rows()) != f0.size()) {
    throw ShapeError("acoustic model: " + std::to_string(frame_ling.rows()) + " frames of linguistic input but " +
                     std::to_string(f0.size()) + " f0 frames");
  }
  if (speaker < 0 || speaker >= speaker_table_.value.rows()) throw Error("acoustic model: speaker index out of range");
  Matrix x(frame_ling.rows(), input_dim());
  x.leftCols(ling) = frame_ling;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double v = f0[static_cast<std::size_t>(t)];
    x(t, ling) = v > 0.0 ? (v - f0_mean) / f0_std : 0.0;
    x(t, ling + 1) = v > 0.0 ? 1.0 : 0.0;
  }
  for (int s = 0; s < kNumStyles; ++s) x.col(ling + 2 + s).setConstant(style[s]);
  for (int k = 0; k < cfg_.speaker_dim; ++k) {
    x.col(ling + 2 + kNumStyles + k).setConstant(speaker_table_.value(speaker, k));
  }
  return x;
}

Matrix AcousticModel::forward(const Matrix& inputs) const {
  auto seq = nn::SequenceBatch::single(inputs);
  for (const auto& layer : layers_) seq.data = layer.forward(seq, nullptr);
  return out_.forward(seq.data);
}

double AcousticModel::accumulate_gradients(const std::vector<const Matrix*>& inputs,
                                           const std::vector<const Matrix*>& targets, std::span<const int> speakers) {
  if (inputs.size() != targets.size() || inputs.size() != speakers.size() || inputs.empty()) {
    throw ShapeError("acoustic batch: inputs, targets and speakers must align");
  }
  const auto in_seq = nn::SequenceBatch::pack(inputs, input_dim());
  const auto tgt_seq = nn::SequenceBatch::pack(targets, kAcousticDim);
  std::vector<nn::SequenceBatch> seqs{in_seq};
  std::vector<nn::LstmCache> caches(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    nn::SequenceBatch next = seqs.back();
    next.data = layers_[l].forward(seqs.back(), &caches[l]);
    seqs.push_back(std::move(next));
  }
  const Matrix pred = out_.forward(seqs.back().data);
  Matrix mask(pred.rows(), kAcousticDim);
  const int b = in_seq.batch;
  for (int t = 0; t < in_seq.steps(); ++t) {
    for (int k = 0; k < b; ++k) mask.row(static_cast<Eigen::Index>(t) * b + k).setConstant(in_seq.mask(t, k));
  }
  Matrix d_pred;
  const double l = nn::masked_mse(pred, tgt_seq.data, mask, &d_pred);
  Matrix d = out_.backward(seqs.back().data, d_pred);
  for (std::size_t i = layers_.size(); i-- > 0;) d = layers_[i].backward(seqs[i], caches[i], d);
  if (cfg_.speaker_dim > 0) {
    const int off = linguistic_feature_dim() + 3 + kNumStyles;
    for (int t = 0; t < in_seq.steps(); ++t) {
      for (int k = 0; k < b; ++k) {
        speaker_table_.grad.row(speakers[static_cast<std::size_t>(k)]) +=
            d.row(static_cast<Eigen::Index>(t) * b + k).segment(off, cfg_.speaker_dim);
      }
    }
  }
  return l;
}

nn::ParamList AcousticModel::params() {
  nn::ParamList p{&speaker_table_};
  for (auto& layer : layers_) layer.collect(p);
  out_.collect(p);
  return p;
}

nn::Checkpoint AcousticModel::to_checkpoint() const {
  nn::Checkpoint c;
  c.kind = "acoustic_model";
  c.config = json{{"hidden", cfg_.hidden},   {"layers", cfg_.layers},     {"speaker_dim", cfg_.speaker_dim},
                  {"seed", cfg_.seed},       {"speakers", cfg_.speakers.names}, {"trained", trained_},
                  {"f0_mean", f0_mean},      {"f0_std", f0_std}}
                 .dump();
  c.put(const_cast<AcousticModel*>(this)->params());
  c.tensors["acoustic.target_mean"] = target_mean_;
  c.tensors["acoustic.target_std"] = target_std_;
  return c;
}

AcousticModel AcousticModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "acoustic_model") throw ParseError("checkpoint is not an acoustic model");
  const auto j = json::parse(ckpt.config);
  AcousticModelConfig cfg;
  cfg.hidden = j.at("hidden").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.speaker_dim = j.at("speaker_dim").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.speakers.names = j.at("speakers").get<std::vector<std::string>>();
  AcousticModel m(cfg);
  ckpt.get(m.params());
  m.trained_ = j.at("trained").get<bool>();
  m.f0_mean = j.at("f0_mean").get<double>();
  m.f0_std = j.at("f0_std").get<double>();
  m.target_mean_ = ckpt.tensor("acoustic.target_mean").row(0);
  m.target_std_ = ckpt.tensor("acoustic.target_std").row(0);
  return m;
}

void AcousticModel::save(const std::filesystem::path& path) const { to_checkpoint().save(path); }

AcousticModel AcousticModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::Checkpoint::load(path, "acoustic_model"));
}

AcousticFrames predict_acoustic(const AcousticModel& model, const Matrix& frame_ling, const ProsodyTrack& prosody,
                                const StyleEmbedding& style, const std::string& speaker, bool strict) {
  if (strict && !model.trained()) throw Error("predict_acoustic: model is untrained");
  if (prosody.total_frames() != static_cast<int>(prosody.f0.size()) ||
      frame_ling.rows() != static_cast<Eigen::Index>(prosody.f0.size())) {
    throw ShapeError("predict_acoustic: linguistic frames (" + std::to_string(frame_ling.rows()) +
                     ") do not align with the prosody track (" + std::to_string(prosody.f0.size()) + ")");
  }
  const Matrix x = model.build_inputs(frame_ling, prosody.f0, style, model.config().speakers.index(speaker));
  Matrix y = model.forward(x);
  y = (y.array().rowwise() * model.target_std().array()).matrix();
  y.rowwise() += model.target_mean();
  AcousticFrames frames{y};
  frames.validate();
  return frames;
}

}  // namespace styletts::tts
