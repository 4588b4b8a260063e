#ifndef STYLETTS_STYLE_MODEL_HPP_
#define STYLETTS_STYLE_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "styletts/corpus.hpp"
#include "styletts/features.hpp"
#include "styletts/nn/checkpoint.hpp"
#include "styletts/nn/layers.hpp"
#include "styletts/nn/recurrent.hpp"
#include "styletts/style.hpp"

namespace styletts::model {

using nn::Matrix;

inline constexpr double kNeutralPriorCap = 0.25;

// Loss and accuracy weights: inverse class prior with the neutral prior
// capped. Classes without training samples get weight 0.
struct ClassWeights {
  std::array<double, kNumStyles> w{};
  double cap = kNeutralPriorCap;
};

ClassWeights class_weights(const std::array<int, kNumStyles>& train_counts, double cap = kNeutralPriorCap);

struct Metrics {
  double unweighted_acc = 0.0;
  double weighted_acc = 0.0;
  std::array<std::optional<double>, kNumStyles> per_class_recall{};  // nullopt: class absent
  std::array<std::array<long, kNumStyles>, kNumStyles> confusion{};   // [true][predicted]
};

using Confusion = std::array<std::array<long, kNumStyles>, kNumStyles>;
Metrics metrics_from_confusion(const Confusion& confusion, const ClassWeights& weights);

struct ClassifierConfig {
  int mfcc_dim = corpus::kMfccDim;
  int prosody_dim = corpus::kProsodyDim;
  int token_dim = corpus::kTokenEmbeddingDim;
  int audio_hidden = 128;
  int text_hidden = 128;
  int audio_dense = 128;
  double bn_momentum = 0.9;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static ClassifierConfig from_json(const std::string& text);
};

// Audio GRU over MFCC frames, its final state joined with the prosody vector
// through a tanh dense layer; text GRU over token embeddings; the two codes
// are concatenated, batch-normalized and mapped to six logits.
class StyleClassifier {
 public:
  explicit StyleClassifier(const ClassifierConfig& cfg = {});

  const ClassifierConfig& config() const { return cfg_; }

  // Inference: BN uses running statistics. Deterministic and thread-safe.
  Matrix logits(std::span<const corpus::FeatureBundle* const> batch) const;
  StyleEmbedding embed(const corpus::FeatureBundle& f) const;
  // Concatenated audio+text representation entering the BN layer.
  Matrix pre_bn(std::span<const corpus::FeatureBundle* const> batch) const;

  // Training-mode pass (BN on batch statistics, running stats updated).
  // Accumulates gradients and returns the mean weighted loss.
  double accumulate_gradients(std::span<const corpus::FeatureBundle* const> batch, std::span<const int> labels,
                              const ClassWeights& weights);

  // Trainable parameters; BN running statistics are excluded.
  nn::ParamList params();
  nn::BatchNorm& batch_norm() { return bn_; }
  const nn::BatchNorm& batch_norm() const { return bn_; }

  nn::Checkpoint to_checkpoint() const;
  static StyleClassifier from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static StyleClassifier load(const std::filesystem::path& path);

 private:
  struct Encoded;
  Encoded encode(std::span<const corpus::FeatureBundle* const> batch, bool keep_cache) const;
  void check_shapes(const corpus::FeatureBundle& f) const;

  ClassifierConfig cfg_;
  nn::Gru audio_rnn_;
  nn::Dense audio_dense_;
  nn::Gru text_rnn_;
  nn::BatchNorm bn_;
  nn::Dense head_;
};

// Weighted softmax cross-entropy of one sample. Throws when the label's
// class weight is zero.
double loss(std::span<const double> logits, int label, const ClassWeights& weights);

struct LabeledExample {
  corpus::FeatureBundle features;  // already normalized
  int label = 0;
  std::string id;
};

struct TrainConfig {
  int max_epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  int patience = 20;  // epochs without dev weighted-accuracy improvement
  std::uint64_t seed = 0;
  double neutral_cap = kNeutralPriorCap;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_unweighted_acc = 0.0;
  double dev_weighted_acc = 0.0;
  double dev_unweighted_acc = 0.0;
};

struct TrainResult {
  StyleClassifier model;
  std::vector<EpochRecord> history;
  ClassWeights weights;
  int best_epoch = 0;
};

// Returns the checkpoint with the best dev weighted accuracy (ties go to the
// lower training loss). Deterministic given the seeds.
TrainResult train(StyleClassifier model, const std::vector<LabeledExample>& train_set,
                  const std::vector<LabeledExample>& dev_set, const TrainConfig& cfg);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

// New model whose BN running statistics are the mean and (unbiased) variance
// of the pre-BN activations over the whole target set. Everything else is
// copied unchanged.
StyleClassifier adapt_bn(const StyleClassifier& model, const std::vector<corpus::FeatureBundle>& target);

Metrics evaluate(const StyleClassifier& model, const std::vector<LabeledExample>& examples,
                 const ClassWeights& weights);

// Features of every labeled utterance in `c`, normalized with `stats`.
// Unlabeled utterances are skipped.
std::vector<LabeledExample> prepare_examples(const corpus::Corpus& c, const corpus::EmbeddingProvider& provider,
                                             const corpus::NormStats* stats, corpus::NormMode mode);
std::vector<corpus::FeatureBundle> extract_corpus_features(const corpus::Corpus& c,
                                                           const corpus::EmbeddingProvider& provider);

struct EmbeddingRecord {
  std::string id;
  StyleEmbedding embedding;
  StyleLabel argmax_label = StyleLabel::kNeutral;
};

struct LabelError {
  std::string id;
  std::string message;
};

struct LabelingResult {
  std::vector<EmbeddingRecord> records;
  std::vector<LabelError> errors;
};

LabelingResult label_corpus(const StyleClassifier& model, const corpus::Corpus& c,
                            const corpus::EmbeddingProvider& provider, const corpus::NormStats& stats,
                            corpus::NormMode mode = corpus::NormMode::kBoth);

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);

}  // namespace styletts::model

#endif  // STYLETTS_STYLE_MODEL_HPP_
