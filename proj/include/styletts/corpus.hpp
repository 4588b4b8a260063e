#ifndef STYLETTS_CORPUS_HPP_
#define STYLETTS_CORPUS_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "styletts/audio.hpp"
#include "styletts/style.hpp"

namespace styletts::corpus {

enum class Split { kTrain, kDev, kTest };
enum class CorpusKind { kTts, kExternal };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct Utterance {
  std::string id;
  std::filesystem::path audio_ref;
  std::string text;
  std::string speaker_id;
  std::optional<StyleLabel> style_label;
  std::string corpus_id;
  Split split = Split::kTrain;
  // Filled by the synthetic generator; read lazily from audio_ref otherwise.
  std::optional<Waveform> audio;
};

struct Corpus {
  std::vector<Utterance> utterances;
  // Directory that relative audio refs resolve against.
  std::filesystem::path base_dir;

  std::size_t size() const { return utterances.size(); }
  std::vector<const Utterance*> select(Split s) const;
  Corpus subset(Split s) const;
};

// Per-split, per-style counts in canonical style order; unlabeled utterances
// are not counted.
using CountTable = std::map<Split, std::array<int, kNumStyles>>;
CountTable count_labels(const Corpus& c);
std::string format_count_table(const CountTable& t);

// External corpora keep only {neutral, happy, sad, angry}; "excited" merges
// into happy. TTS labels map one-to-one onto the six styles. Never throws.
std::optional<StyleLabel> map_label(std::string_view raw, CorpusKind kind);

// JSON-lines manifest with fields {id, audio, text, speaker, style?, split,
// corpus}. Errors name the offending line.
Corpus load_manifest(const std::filesystem::path& path, CorpusKind kind = CorpusKind::kTts);
Corpus parse_manifest(std::string_view content, CorpusKind kind, const std::filesystem::path& base_dir = {});
void write_manifest(const std::filesystem::path& path, const Corpus& c);

// Returns the in-memory audio, or reads audio_ref (resolved against
// base_dir) resampled to `rate`.
Waveform load_audio(const Corpus& c, const Utterance& u, int rate = kDefaultSampleRate);

}  // namespace styletts::corpus

#endif  // STYLETTS_CORPUS_HPP_
