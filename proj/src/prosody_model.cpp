#include "styletts/prosody_model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "styletts/error.hpp"

namespace styletts::tts {

using nlohmann::json;

int ProsodyTrack::total_frames() const {
  int s = 0;
  for (int d : durations) s += d;
  return s;
}

void ProsodyTrack::validate() const {
  for (int d : durations) {
    if (d < 1) throw Error("prosody track has a duration below one frame");
  }
  if (static_cast<std::size_t>(total_frames()) != f0.size()) {
    throw Error("prosody track durations sum to " + std::to_string(total_frames()) + " but f0 has " +
                std::to_string(f0.size()) + " frames");
  }
  for (double v : f0) {
    if (v != 0.0 && (v < kMinF0 || v > kMaxF0)) throw Error("prosody track f0 out of range");
  }
}

int SpeakerTable::index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw Error("unknown speaker \"" + name + "\"");
}

ProsodyModel::ProsodyModel(const ProsodyModelConfig& cfg) : cfg_(cfg) {
  if (cfg.hidden <= 0 || cfg.speaker_dim < 0 || cfg.speakers.names.empty()) {
    throw Error("invalid prosody model configuration");
  }
  nn::Rng rng(cfg.seed);
  const int ling = linguistic_feature_dim();
  speaker_table_ = nn::Param("prosody.speaker", nn::uniform_init(static_cast<Eigen::Index>(cfg.speakers.names.size()),
                                                                 cfg.speaker_dim, 0.1, rng));
  rnn_ = nn::Lstm("prosody.rnn", input_dim(), cfg.hidden, rng);
  attention_ = nn::GlobalAttention("prosody.attention", cfg.hidden, ling, rng);
  out_ = nn::Dense("prosody.out", cfg.hidden + ling + conditioning_dim(), 4, rng);
}

int ProsodyModel::input_dim() const { return linguistic_feature_dim() + conditioning_dim(); }

Matrix ProsodyModel::build_inputs(const LinguisticSequence& ling, const StyleEmbedding& style, int speaker) const {
  const int dim = linguistic_feature_dim();
  if (ling.features.cols() != dim || ling.features.rows() == 0) {
    throw ShapeError("prosody model: linguistic features must be N x " + std::to_string(dim));
  }
  if (speaker < 0 || speaker >= speaker_table_.value.rows()) throw Error("prosody model: speaker index out of range");
  const auto n = ling.features.rows();
  Matrix x(n, input_dim());
  x.leftCols(dim) = ling.features;
  for (int s = 0; s < kNumStyles; ++s) x.col(dim + s).setConstant(style[s]);
  for (int k = 0; k < cfg_.speaker_dim; ++k) x.col(dim + kNumStyles + k).setConstant(speaker_table_.value(speaker, k));
  return x;
}

Matrix ProsodyModel::forward(const LinguisticSequence& ling, const StyleEmbedding& style, int speaker) const {
  const Matrix x = build_inputs(ling, style, speaker);
  const Matrix states = rnn_.forward(nn::SequenceBatch::single(x), nullptr);
  const Matrix context = attention_.forward(states, ling.features, nullptr);
  Matrix joint(x.rows(), cfg_.hidden + context.cols() + conditioning_dim());
  joint << states, context, x.rightCols(conditioning_dim());
  return out_.forward(joint);
}

double ProsodyModel::accumulate_gradients(const LinguisticSequence& ling, const StyleEmbedding& style, int speaker,
                                          const ProsodyTargets& targets) {
  const Matrix x = build_inputs(ling, style, speaker);
  const auto seq = nn::SequenceBatch::single(x);
  nn::LstmCache rnn_cache;
  const Matrix states = rnn_.forward(seq, &rnn_cache);
  nn::AttentionCache att_cache;
  const Matrix context = attention_.forward(states, ling.features, &att_cache);
  const int cond = conditioning_dim();
  Matrix joint(x.rows(), cfg_.hidden + context.cols() + cond);
  joint << states, context, x.rightCols(cond);
  const Matrix pred = out_.forward(joint);
  if (targets.values.rows() != pred.rows() || targets.values.cols() != 4) {
    throw ShapeError("prosody targets must be N x 4");
  }
  Matrix d_pred;
  const double l = nn::masked_mse(pred, targets.values, targets.mask, &d_pred);

  const Matrix d_joint = out_.backward(joint, d_pred);
  Matrix d_states = d_joint.leftCols(cfg_.hidden);
  d_states += attention_.backward(att_cache, d_joint.middleCols(cfg_.hidden, context.cols()));
  const Matrix d_x = rnn_.backward(seq, rnn_cache, d_states);
  if (cfg_.speaker_dim > 0) {
    const int off = linguistic_feature_dim() + kNumStyles;
    const Eigen::RowVectorXd d_spk = d_x.middleCols(off, cfg_.speaker_dim).colwise().sum() +
                                     d_joint.rightCols(cfg_.speaker_dim).colwise().sum();
    speaker_table_.grad.row(speaker) += d_spk;
  }
  return l;
}

nn::ParamList ProsodyModel::params() {
  nn::ParamList p{&speaker_table_};
  rnn_.collect(p);
  attention_.collect(p);
  out_.collect(p);
  return p;
}

nn::Checkpoint ProsodyModel::to_checkpoint() const {
  nn::Checkpoint c;
  c.kind = "prosody_model";
  c.config = json{{"hidden", cfg_.hidden},
                  {"speaker_dim", cfg_.speaker_dim},
                  {"seed", cfg_.seed},
                  {"speakers", cfg_.speakers.names},
                  {"trained", trained_},
                  {"norm", {norm_.log_dur_mean, norm_.log_dur_std, norm_.f0_mean, norm_.f0_std}}}
                 .dump();
  c.put(const_cast<ProsodyModel*>(this)->params());
  return c;
}

ProsodyModel ProsodyModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "prosody_model") throw ParseError("checkpoint is not a prosody model");
  const auto j = json::parse(ckpt.config);
  ProsodyModelConfig cfg;
  cfg.hidden = j.at("hidden").get<int>();
  cfg.speaker_dim = j.at("speaker_dim").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.speakers.names = j.at("speakers").get<std::vector<std::string>>();
  ProsodyModel m(cfg);
  ckpt.get(m.params());
  m.trained_ = j.at("trained").get<bool>();
  const auto norm = j.at("norm").get<std::vector<double>>();
  if (norm.size() != 4) throw ParseError("prosody checkpoint norm must have four values");
  m.norm_ = {norm[0], norm[1], norm[2], norm[3]};
  return m;
}

void ProsodyModel::save(const std::filesystem::path& path) const { to_checkpoint().save(path); }

ProsodyModel ProsodyModel::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::Checkpoint::load(path, "prosody_model"));
}

ProsodyTrack predict_prosody(const ProsodyModel& model, const LinguisticSequence& ling, const StyleEmbedding& style,
                             const std::string& speaker, bool strict) {
  if (strict && !model.trained()) throw Error("predict_prosody: model is untrained");
  // The all-zero vector is the "no style" input of baseline models.
  if (!on_simplex(style) && style != StyleEmbedding{}) throw Error("predict_prosody: style embedding is not a probability vector");
  const Matrix out = model.forward(ling, style, model.config().speakers.index(speaker));
  const auto& norm = model.norm();
  const int pause = PhonemeInventory::instance().pause_id();
  ProsodyTrack track;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double log_dur = out(i, 0) * norm.log_dur_std + norm.log_dur_mean;
    const int dur = std::clamp(static_cast<int>(std::lround(std::exp(std::clamp(log_dur, -5.0, 6.0)))), 1, 400);
    track.durations.push_back(dur);
    const bool voiced = out(i, 3) > 0.5 && ling.phonemes[static_cast<std::size_t>(i)] != pause;
    const double start = std::clamp(out(i, 1) * norm.f0_std + norm.f0_mean, kMinF0, kMaxF0);
    const double end = std::clamp(out(i, 2) * norm.f0_std + norm.f0_mean, kMinF0, kMaxF0);
    for (int k = 0; k < dur; ++k) {
      const double pos = dur > 1 ? static_cast<double>(k) / (dur - 1) : 0.5;
      track.f0.push_back(voiced ? start + (end - start) * pos : 0.0);
    }
  }
  return track;
}

}  // namespace styletts::tts
