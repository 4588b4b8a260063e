#ifndef STYLETTS_NEURAL_VOCODER_HPP_
#define STYLETTS_NEURAL_VOCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "styletts/acoustic_model.hpp"
#include "styletts/audio.hpp"
#include "styletts/dsp.hpp"
#include "styletts/nn/checkpoint.hpp"
#include "styletts/nn/layers.hpp"
#include "styletts/nn/recurrent.hpp"

namespace styletts::tts {

struct NeuralVocoderConfig {
  int hidden = 128;
  int epochs = 50;
  int chunk = 240;        // samples per truncated training sequence
  int batch_size = 16;
  double learning_rate = 2e-3;
  int sample_rate = kDefaultSampleRate;
  dsp::Framing framing;
  std::uint64_t seed = 0;
};

// Paired training item: frame features and the waveform they describe.
struct VocoderExample {
  AcousticFrames frames;
  std::vector<double> f0;
  Waveform audio;
};

// Cepstra and F0 analysed from the waveform itself.
VocoderExample make_vocoder_example(const Waveform& audio);

// Autoregressive GRU over mu-law samples. Input per sample: previous decoded
// sample plus the frame conditioning (13 cepstra, scaled f0, voiced flag).
class NeuralVocoder {
 public:
  explicit NeuralVocoder(const NeuralVocoderConfig& cfg = {});

  const NeuralVocoderConfig& config() const { return cfg_; }
  static constexpr int kCondDim = 15;

  // Per-sample conditioning, (frames * hop) x 15.
  Matrix conditioning(const AcousticFrames& frames, const std::vector<double>& f0) const;
  double accumulate_gradients(const std::vector<const Matrix*>& inputs, const std::vector<std::vector<int>>& targets);
  double loss(const Matrix& inputs, const std::vector<int>& targets) const;
  Waveform generate(const AcousticFrames& frames, const std::vector<double>& f0, std::uint64_t seed) const;

  Eigen::RowVectorXd& cond_mean() { return cond_mean_; }
  Eigen::RowVectorXd& cond_std() { return cond_std_; }

  nn::ParamList params();
  nn::Checkpoint to_checkpoint() const;
  static NeuralVocoder from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static NeuralVocoder load(const std::filesystem::path& path);

 private:
  NeuralVocoderConfig cfg_;
  Eigen::RowVectorXd cond_mean_, cond_std_;
  nn::Gru rnn_;
  nn::Dense out_;
};

struct NeuralVocoderResult {
  NeuralVocoder model;
  std::vector<double> loss_history;  // entry 0 is the loss before training
};

NeuralVocoderResult train_neural_vocoder(const std::vector<VocoderExample>& data, const NeuralVocoderConfig& cfg);

// Seeded ancestral sampling; frames * hop samples in [-1, 1].
Waveform vocode_neural(const NeuralVocoder& model, const AcousticFrames& frames, const std::vector<double>& f0,
                       std::uint64_t seed = 0);

// Sine tones analysed into vocoder examples, for smoke training.
std::vector<VocoderExample> sine_corpus(int count, double seconds, int sample_rate, std::uint64_t seed);

}  // namespace styletts::tts

#endif  // STYLETTS_NEURAL_VOCODER_HPP_
