#ifndef STYLETTS_SYNTHETIC_HPP_
#define STYLETTS_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "styletts/corpus.hpp"

namespace styletts::corpus {

// Per-style generation targets.
struct SyntheticStyleSpec {
  double f0_mean = 184.0;  // Hz, mean over voiced frames of an utterance
  double f0_std = 10.0;    // Hz, spread of per-word pitch targets
  double rate = 1.0;       // relative speaking rate (>1 is faster)
  double energy = 0.5;     // peak amplitude in (0, 1)
};

using SyntheticSpec = std::map<StyleLabel, SyntheticStyleSpec>;

// Means follow the per-style F0 pattern of the reference TTS corpus (happy
// highest); happy = 215 Hz and neutral = 184 Hz.
SyntheticSpec default_synthetic_spec();

struct SyntheticOptions {
  int sample_rate = kDefaultSampleRate;
  double train_fraction = 1.0;
  double dev_fraction = 0.0;  // remainder after train and dev goes to test
  double keyword_prob = 0.7;  // chance that a sentence carries a style keyword
  std::string corpus_id = "synthetic";
  std::string speaker_id = "spk0";
};

// Deterministic given (spec, n_per_class, seed, options). Audio is kept in
// memory; audio_ref is "<id>.wav".
Corpus generate_synthetic_corpus(const SyntheticSpec& spec, int n_per_class, std::uint64_t seed,
                                 const SyntheticOptions& options = {});

// Writes every in-memory waveform to dir/<audio_ref> and the manifest to
// dir/manifest.jsonl. Returns the manifest path.
std::filesystem::path save_corpus(const Corpus& c, const std::filesystem::path& dir);

// Renders one utterance of `text` in the given style (used by the generator
// and by tests that need a single query).
Waveform render_styled_speech(const std::string& text, const SyntheticStyleSpec& style, std::uint64_t seed,
                              int sample_rate = kDefaultSampleRate);

// Emotionally neutral sentences built from lexicon words.
const std::vector<std::string>& neutral_sentences();
// Keywords associated with a style in generated transcripts.
const std::vector<std::string>& style_keywords(StyleLabel s);

}  // namespace styletts::corpus

#endif  // STYLETTS_SYNTHETIC_HPP_
