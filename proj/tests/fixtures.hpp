#ifndef STYLETTS_TESTS_FIXTURES_HPP_
#define STYLETTS_TESTS_FIXTURES_HPP_

#include <memory>
#include <random>
#include <vector>

#include "styletts/features.hpp"
#include "styletts/pipeline.hpp"
#include "styletts/style_model.hpp"
#include "styletts/synthetic.hpp"
#include "styletts/tts_train.hpp"
#include "support.hpp"

namespace styletts::testing {

// Gaussian features with the configured widths.
corpus::FeatureBundle random_bundle(std::mt19937_64& rng, const model::ClassifierConfig& cfg, int frames, int tokens,
                                    double shift = 0.0);

// Tiny classifier for finite-difference checks.
model::ClassifierConfig micro_classifier_config(std::uint64_t seed);

// Each check builds a micro model from `seed` and compares every parameter
// gradient (and input gradients where the layer returns them).
GradCheck classifier_grad_check(std::uint64_t seed);
GradCheck prosody_grad_check(std::uint64_t seed);
GradCheck attention_grad_check(std::uint64_t seed);
GradCheck gru_grad_check(std::uint64_t seed);
GradCheck lstm_grad_check(std::uint64_t seed);
GradCheck acoustic_grad_check(std::uint64_t seed);
GradCheck vocoder_grad_check(std::uint64_t seed);

// Synthetic corpus split into train and dev, features extracted and
// normalized with train statistics.
struct ClassifierData {
  corpus::Corpus corpus;
  std::shared_ptr<corpus::HashEmbeddingProvider> provider;
  corpus::NormStats stats;
  std::vector<corpus::FeatureBundle> raw;  // corpus order
  std::vector<model::LabeledExample> train, dev;
};
ClassifierData make_classifier_data(int n_per_class, double train_fraction, std::uint64_t seed,
                                    corpus::NormMode mode = corpus::NormMode::kBoth);

struct ToyOptions {
  int n_per_class = 20;
  std::uint64_t seed = 7;
  int classifier_epochs = 60;
  int tts_epochs = 50;
  int tts_hidden = 64;
  double tts_lr = 3e-3;
};

// Classifier, AdaBN, corpus labeling and TTS training on the synthetic corpus.
struct ToySystem {
  ClassifierData data;
  model::TrainResult classifier;
  std::vector<model::EmbeddingRecord> labels;
  tts::TtsTrainResult tts;
  pipeline::ModelBundle bundle;
};
ToySystem build_toy_system(const ToyOptions& opt);

// Mean voiced F0 of synthesized audio over the neutral sentence pool.
double mean_synth_f0(const pipeline::ModelBundle& bundle, const StyleEmbedding& style);

}  // namespace styletts::testing

#endif  // STYLETTS_TESTS_FIXTURES_HPP_
