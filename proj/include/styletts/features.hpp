#ifndef STYLETTS_FEATURES_HPP_
#define STYLETTS_FEATURES_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "styletts/audio.hpp"
#include "styletts/dsp.hpp"
#include "styletts/embedding.hpp"

namespace styletts::corpus {

inline constexpr int kNumCepstra = 13;
inline constexpr int kMfccDim = 39;
inline constexpr int kProsodyDim = 35;

struct MfccConfig {
  dsp::Framing framing;
  int num_filters = 40;
  int num_cepstra = kNumCepstra;
  double preemphasis = 0.97;
  double energy_floor = 1e-10;  // applied to mel energies before the log
  int delta_window = 2;
  double low_hz = 0.0;
};

// T x 13 static cepstra (C0..C12).
Eigen::MatrixXd extract_cepstra(const Waveform& audio, const MfccConfig& cfg = {});
// Appends regression deltas over +-window frames (edges replicated).
Eigen::MatrixXd add_deltas(const Eigen::MatrixXd& statics, int window);
// T x 39: cepstra, deltas, delta-deltas. Throws on audio shorter than one window.
Eigen::MatrixXd extract_mfcc(const Waveform& audio, const MfccConfig& cfg = {});

// Layout of the utterance-level prosody vector.
enum ProsodyIndex : int {
  kF0Mean = 0, kF0Std, kF0Min, kF0Max, kF0Range, kF0Median, kF0Slope,
  kLogEnergyMean, kLogEnergyStd, kLogEnergyMin, kLogEnergyMax, kLogEnergyRange, kLogEnergySlope,
  kVoicedRatio,
  kSpeakingRate,
  kZcrMean, kZcrStd,
  kEnergyDeltaMean, kEnergyDeltaStd,
  kF0DeltaMean, kF0DeltaStd,
  kCentroidMean, kCentroidStd,
  kRolloffMean, kRolloffStd,
  kRmsMean, kRmsStd, kRmsMax,
  kPauseRatio, kPauseCount, kDurationSec,
  kHnrMean, kHnrStd,
  kFlatnessMean, kFlatnessStd,
};
static_assert(kFlatnessStd + 1 == kProsodyDim);

// token_count > 0 sets the speaking-rate denominator; otherwise the number
// of voiced runs stands in for it.
Eigen::VectorXd extract_prosody(const Waveform& audio, int token_count = 0);

struct FeatureBundle {
  Eigen::MatrixXd mfcc;              // T x 39
  Eigen::VectorXd prosody;           // 35
  std::vector<std::string> tokens;
  Eigen::MatrixXd token_embeddings;  // L x 300

  // Throws ShapeError when any shape invariant or finiteness fails.
  void validate() const;
};

FeatureBundle extract_features(const Waveform& audio, std::string_view text, const EmbeddingProvider& provider);

enum class NormMode { kNone, kMfcc, kProsody, kBoth };
std::string_view norm_mode_name(NormMode m);
NormMode parse_norm_mode(std::string_view name);

inline constexpr double kNormEpsilon = 1e-8;

struct NormStats {
  std::string corpus_id;
  Eigen::VectorXd mfcc_mean, mfcc_std;
  Eigen::VectorXd prosody_mean, prosody_std;
  double epsilon = kNormEpsilon;

  void save(const std::filesystem::path& path) const;
  static NormStats load(const std::filesystem::path& path);
  std::string to_json() const;
  static NormStats from_json(std::string_view text);
};

// Population statistics over all MFCC frames and all prosody vectors of one
// corpus. Std entries are clamped to epsilon.
NormStats fit_normalizer(const std::vector<FeatureBundle>& features, std::string corpus_id);
FeatureBundle apply_normalizer(const FeatureBundle& f, const NormStats& stats, NormMode mode = NormMode::kBoth);

}  // namespace styletts::corpus

#endif  // STYLETTS_FEATURES_HPP_
