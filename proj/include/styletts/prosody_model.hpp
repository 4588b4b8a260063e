#ifndef STYLETTS_PROSODY_MODEL_HPP_
#define STYLETTS_PROSODY_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styletts/frontend.hpp"
#include "styletts/nn/attention.hpp"
#include "styletts/nn/checkpoint.hpp"
#include "styletts/nn/layers.hpp"
#include "styletts/nn/recurrent.hpp"
#include "styletts/style.hpp"

namespace styletts::tts {

using nn::Matrix;

inline constexpr double kMinF0 = 50.0;
inline constexpr double kMaxF0 = 500.0;

struct ProsodyTrack {
  std::vector<int> durations;  // frames per phoneme, each >= 1
  std::vector<double> f0;      // Hz per frame, 0 = unvoiced

  int total_frames() const;
  // Sum of durations equals f0 length, durations >= 1, voiced f0 in range.
  void validate() const;
};

// Speaker ids known to a model; index 0 is the default voice.
struct SpeakerTable {
  std::vector<std::string> names{"spk0"};
  int index(const std::string& name) const;  // throws on unknown ids
};

struct ProsodyModelConfig {
  int hidden = 256;
  int speaker_dim = 4;
  std::uint64_t seed = 0;
  SpeakerTable speakers;
};

// Target normalization stored alongside the weights.
struct ProsodyNorm {
  double log_dur_mean = 1.5, log_dur_std = 0.5;
  double f0_mean = 180.0, f0_std = 30.0;
};

// Per-phoneme regression targets (normalized), one row per phoneme:
// log duration, f0 at phoneme start, f0 at phoneme end, voiced flag.
struct ProsodyTargets {
  Matrix values;  // N x 4
  Matrix mask;    // N x 4; f0 columns masked out for unvoiced phonemes
};

// Single-layer LSTM over linguistic features plus the conditioning vector
// (style embedding ++ speaker embedding) at every step, followed by global
// attention over the utterance's linguistic features.
class ProsodyModel {
 public:
  explicit ProsodyModel(const ProsodyModelConfig& cfg = {});

  const ProsodyModelConfig& config() const { return cfg_; }
  int input_dim() const;
  int conditioning_dim() const { return kNumStyles + cfg_.speaker_dim; }
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }
  ProsodyNorm& norm() { return norm_; }
  const ProsodyNorm& norm() const { return norm_; }

  // Raw N x 4 outputs in normalized units.
  Matrix forward(const LinguisticSequence& ling, const StyleEmbedding& style, int speaker) const;
  double accumulate_gradients(const LinguisticSequence& ling, const StyleEmbedding& style, int speaker,
                              const ProsodyTargets& targets);

  nn::ParamList params();

  nn::Checkpoint to_checkpoint() const;
  static ProsodyModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static ProsodyModel load(const std::filesystem::path& path);

 private:
  Matrix build_inputs(const LinguisticSequence& ling, const StyleEmbedding& style, int speaker) const;

  ProsodyModelConfig cfg_;
  ProsodyNorm norm_;
  bool trained_ = false;
  nn::Param speaker_table_;
  nn::Lstm rnn_;
  nn::GlobalAttention attention_;
  nn::Dense out_;
};

// strict: an untrained model is an error rather than a random prediction.
ProsodyTrack predict_prosody(const ProsodyModel& model, const LinguisticSequence& ling, const StyleEmbedding& style,
                             const std::string& speaker, bool strict = true);

}  // namespace styletts::tts

#endif  // STYLETTS_PROSODY_MODEL_HPP_
