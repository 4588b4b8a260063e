#ifndef STYLETTS_ACOUSTIC_MODEL_HPP_
#define STYLETTS_ACOUSTIC_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "styletts/frontend.hpp"
#include "styletts/nn/checkpoint.hpp"
#include "styletts/nn/layers.hpp"
#include "styletts/nn/recurrent.hpp"
#include "styletts/prosody_model.hpp"
#include "styletts/style.hpp"

namespace styletts::tts {

inline constexpr int kAcousticDim = 13;

struct AcousticFrames {
  Matrix mfcc;  // T x 13

  int frames() const { return static_cast<int>(mfcc.rows()); }
  void validate() const;
};

// Phoneme features repeated over each phoneme's frames, plus the relative
// position of the frame inside its phoneme: T x (linguistic_dim + 1).
Matrix upsample_linguistic(const LinguisticSequence& ling, const std::vector<int>& durations);

struct AcousticModelConfig {
  int hidden = 256;
  int layers = 2;
  int speaker_dim = 4;
  std::uint64_t seed = 0;
  SpeakerTable speakers;
};

// Stacked unidirectional LSTM from frame-level linguistic + prosodic inputs
// and the conditioning vector to 13 cepstra.
class AcousticModel {
 public:
  explicit AcousticModel(const AcousticModelConfig& cfg = {});

  const AcousticModelConfig& config() const { return cfg_; }
  int input_dim() const;
  int conditioning_dim() const { return kNumStyles + cfg_.speaker_dim; }
  bool trained() const { return trained_; }
  void set_trained(bool t) { trained_ = t; }

  // Per-dimension target normalization, and F0 normalization of the input.
  Eigen::RowVectorXd& target_mean() { return target_mean_; }
  Eigen::RowVectorXd& target_std() { return target_std_; }
  const Eigen::RowVectorXd& target_mean() const { return target_mean_; }
  const Eigen::RowVectorXd& target_std() const { return target_std_; }
  double f0_mean = 180.0;
  double f0_std = 30.0;

  Matrix build_inputs(const Matrix& frame_ling, const std::vector<double>& f0, const StyleEmbedding& style,
                      int speaker) const;
  // Normalized-unit outputs for one utterance.
  Matrix forward(const Matrix& inputs) const;
  // Batched training pass; targets are normalized T x 13 matrices.
  double accumulate_gradients(const std::vector<const Matrix*>& inputs, const std::vector<const Matrix*>& targets,
                              std::span<const int> speakers);

  nn::ParamList params();

  nn::Checkpoint to_checkpoint() const;
  static AcousticModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static AcousticModel load(const std::filesystem::path& path);

 private:
  AcousticModelConfig cfg_;
  bool trained_ = false;
  Eigen::RowVectorXd target_mean_;
  Eigen::RowVectorXd target_std_;
  nn::Param speaker_table_;
  std::vector<nn::Lstm> layers_;
  nn::Dense out_;
};

// frame_ling must have one row per frame of `prosody`.
AcousticFrames predict_acoustic(const AcousticModel& model, const Matrix& frame_ling, const ProsodyTrack& prosody,
                                const StyleEmbedding& style, const std::string& speaker, bool strict = true);

}  // namespace styletts::tts

#endif  // STYLETTS_ACOUSTIC_MODEL_HPP_
