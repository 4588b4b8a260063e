#ifndef STYLETTS_TTS_TRAIN_HPP_
#define STYLETTS_TTS_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "styletts/acoustic_model.hpp"
#include "styletts/audio.hpp"
#include "styletts/corpus.hpp"
#include "styletts/frontend.hpp"
#include "styletts/prosody_model.hpp"
#include "styletts/style.hpp"

namespace styletts::tts {

// Training targets of one utterance, cropped to its voiced region.
struct TtsTargets {
  LinguisticSequence ling;
  std::vector<int> durations;  // uniform split of the cropped frames
  std::vector<double> f0;      // per frame, 0 = unvoiced
  Matrix cepstra;              // frames x 13
  std::vector<bool> phoneme_voiced;
  std::vector<double> f0_start, f0_end;  // per phoneme, 0 when unvoiced
};

// A phoneme counts as voiced when at least half of its frames are; its start
// and end f0 are the first and last voiced frames inside it.
TtsTargets extract_tts_targets(const Waveform& audio, const std::string& text, const Lexicon& lexicon);

struct TtsTrainConfig {
  int epochs = 300;
  int batch_size = 8;
  double learning_rate = 1e-3;
  int prosody_hidden = 256;
  int acoustic_hidden = 256;
  int acoustic_layers = 2;
  int speaker_dim = 4;
  std::uint64_t seed = 0;
  bool zero_style = false;  // baseline: style input held at zero
  bool parallel = true;     // train the two models on separate threads
};

struct TtsEpoch {
  int epoch = 0;
  double prosody_loss = 0.0;
  double acoustic_loss = 0.0;
  double total() const { return prosody_loss + acoustic_loss; }
};

struct TtsModels {
  ProsodyModel prosody;
  AcousticModel acoustic;
  bool zero_style = false;

  void save(const std::filesystem::path& dir) const;
  static TtsModels load(const std::filesystem::path& dir);
};

struct TtsTrainResult {
  TtsModels models;
  std::vector<TtsEpoch> history;  // epoch 0 is the loss before any update
};

// Trains both models by MSE. Every training utterance needs an entry in
// `embeddings`; missing ones are reported together.
TtsTrainResult train_tts(const corpus::Corpus& corpus, const std::map<std::string, StyleEmbedding>& embeddings,
                         const Lexicon& lexicon, const TtsTrainConfig& cfg);

void write_tts_history_csv(const std::filesystem::path& path, const std::vector<TtsEpoch>& history);

}  // namespace styletts::tts

#endif  // STYLETTS_TTS_TRAIN_HPP_
