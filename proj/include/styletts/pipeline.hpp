#ifndef STYLETTS_PIPELINE_HPP_
#define STYLETTS_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "styletts/audio.hpp"
#include "styletts/embedding.hpp"
#include "styletts/error.hpp"
#include "styletts/features.hpp"
#include "styletts/frontend.hpp"
#include "styletts/neural_vocoder.hpp"
#include "styletts/style_model.hpp"
#include "styletts/tts_train.hpp"
#include "styletts/vocoder.hpp"

namespace styletts::pipeline {

inline constexpr double kSelectedWeight = 0.95;
inline constexpr double kOtherWeight = 0.01;

// 0.95 on the chosen style, 0.01 elsewhere.
StyleEmbedding make_style_embedding(StyleLabel style);
// Canonical names only; anything else (e.g. "excited") throws.
StyleEmbedding make_style_embedding(std::string_view name);

// Weights are normalized to sum to one; unnamed styles get zero.
StyleEmbedding mix_style_embedding(const std::map<StyleLabel, double>& weights);
StyleEmbedding mix_style_embedding(const std::map<std::string, double>& weights);

// Error raised by one synthesis stage; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct QueryRef {
  std::filesystem::path audio_ref;
  std::string transcript;
  std::optional<Waveform> audio;  // used instead of audio_ref when present
};

struct SynthesisRequest {
  std::string text;
  std::optional<StyleEmbedding> embedding;
  std::optional<std::string> named_style;
  std::optional<QueryRef> query;
  std::string speaker = "spk0";

  // Exactly one style source must be present.
  void validate() const;
};

enum class VocoderKind { kDsp, kNeural };
std::string_view vocoder_name(VocoderKind k);
VocoderKind parse_vocoder(std::string_view name);

// Classifier plus the normalization applied to query features.
struct StyleExtractor {
  model::StyleClassifier classifier;
  corpus::NormStats query_stats;
  corpus::NormMode mode = corpus::NormMode::kBoth;
  std::shared_ptr<const corpus::EmbeddingProvider> provider;
};

StyleEmbedding extract_query_style(const StyleExtractor& extractor, const Waveform& audio, std::string_view text);

// Everything synthesis needs. Immutable once shared.
struct ModelBundle {
  tts::TtsModels tts;
  tts::Lexicon lexicon;
  std::optional<StyleExtractor> extractor;
  std::optional<tts::NeuralVocoder> neural_vocoder;
  VocoderKind vocoder = VocoderKind::kDsp;
  int sample_rate = kDefaultSampleRate;
  std::uint64_t seed = 0;
};

// Directory layout: tts/ (prosody.ckpt, acoustic.ckpt), optional
// classifier.ckpt with query_norm.json, optional vocoder.ckpt.
ModelBundle load_bundle(const std::filesystem::path& dir, VocoderKind vocoder = VocoderKind::kDsp,
                        std::shared_ptr<const corpus::EmbeddingProvider> provider = nullptr);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);

struct SynthesisResult {
  Waveform audio;
  StyleEmbedding embedding;  // the resolved conditioning vector
  tts::ProsodyTrack prosody;
};

StyleEmbedding resolve_style(const SynthesisRequest& request, const ModelBundle& models);
SynthesisResult synthesize(const SynthesisRequest& request, const ModelBundle& models);

// Synthesis from an already-resolved embedding.
SynthesisResult synthesize_with(const std::string& text, const StyleEmbedding& style, const std::string& speaker,
                                const ModelBundle& models);

SynthesisResult respond(const Waveform& query_audio, std::string_view query_text, const std::string& response_text,
                        const ModelBundle& models, const std::string& speaker = "spk0");

// Shared handle to the current bundle; reload swaps it atomically while
// in-flight requests keep the bundle they started with.
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::shared_ptr<const ModelBundle> initial) : current_(std::move(initial)) {}

  std::shared_ptr<const ModelBundle> get() const;
  void swap(std::shared_ptr<const ModelBundle> next);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const ModelBundle> current_;
};

}  // namespace styletts::pipeline

#endif  // STYLETTS_PIPELINE_HPP_
