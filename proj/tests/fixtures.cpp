#include "fixtures.hpp"

#include <numeric>

#include "styletts/acoustic_model.hpp"
#include "styletts/frontend.hpp"
#include "styletts/neural_vocoder.hpp"
#include "styletts/nn/attention.hpp"
#include "styletts/nn/recurrent.hpp"
#include "styletts/pitch.hpp"
#include "styletts/prosody_model.hpp"

namespace styletts::testing {

using nn::Matrix;

namespace {

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

StyleEmbedding random_embedding(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  StyleEmbedding e;
  double s = 0.0;
  for (auto& v : e.p) s += (v = u(rng));
  for (auto& v : e.p) v /= s;
  return e;
}

void merge(GradCheck& into, const GradCheck& g) {
  if (g.max_rel_error > into.max_rel_error) {
    into.max_rel_error = g.max_rel_error;
    into.worst = g.worst;
  }
  into.entries += g.entries;
}

}  // namespace

corpus::FeatureBundle random_bundle(std::mt19937_64& rng, const model::ClassifierConfig& cfg, int frames, int tokens,
                                    double shift) {
  corpus::FeatureBundle f;
  f.mfcc = gaussian(rng, frames, cfg.mfcc_dim).array() + shift;
  f.prosody = gaussian(rng, cfg.prosody_dim, 1).col(0).array() + shift;
  f.token_embeddings = gaussian(rng, tokens, cfg.token_dim);
  for (int i = 0; i < tokens; ++i) f.tokens.push_back("t" + std::to_string(i));
  return f;
}

model::ClassifierConfig micro_classifier_config(std::uint64_t seed) {
  model::ClassifierConfig c;
  c.mfcc_dim = 3;
  c.prosody_dim = 2;
  c.token_dim = 4;
  c.audio_hidden = 3;
  c.text_hidden = 3;
  c.audio_dense = 3;
  c.seed = seed;
  return c;
}

GradCheck classifier_grad_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto cfg = micro_classifier_config(seed);
  model::StyleClassifier m(cfg);
  // Two frames and two tokens per sample; BN needs a batch.
  std::vector<corpus::FeatureBundle> data;
  for (int i = 0; i < 3; ++i) data.push_back(random_bundle(rng, cfg, 2, 2));
  std::vector<const corpus::FeatureBundle*> batch;
  for (const auto& f : data) batch.push_back(&f);
  const std::vector<int> labels = {0, 3, 5};
  const auto w = model::class_weights({1, 0, 0, 1, 0, 1});
  return check_gradients(m.params(), [&] { return m.accumulate_gradients(batch, labels, w); });
}

GradCheck prosody_grad_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  tts::ProsodyModelConfig cfg;
  cfg.hidden = 3;
  cfg.speaker_dim = 2;
  cfg.seed = seed;
  cfg.speakers.names = {"a", "b"};
  tts::ProsodyModel m(cfg);
  const auto ling = tts::text_to_linguistic("hi, cat", tts::Lexicon::shipped());
  const auto n = static_cast<Eigen::Index>(ling.size());
  tts::ProsodyTargets t;
  t.values = gaussian(rng, n, 4);
  t.mask = Matrix::Ones(n, 4);
  t.mask(0, 1) = 0.0;
  t.mask(0, 2) = 0.0;
  const auto style = random_embedding(rng);
  return check_gradients(m.params(), [&] { return m.accumulate_gradients(ling, style, 1, t); });
}

GradCheck attention_grad_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::GlobalAttention att("att", 3, 4, rng);
  nn::Param query("query", gaussian(rng, 5, 3));
  nn::Param memory("memory", gaussian(rng, 6, 4));
  const Matrix r = gaussian(rng, 5, 4);
  nn::ParamList params;
  att.collect(params);
  params.push_back(&query);
  params.push_back(&memory);
  return check_gradients(params, [&] {
    nn::AttentionCache cache;
    const Matrix ctx = att.forward(query.value, memory.value, &cache);
    Matrix d_memory;
    query.grad += att.backward(cache, r, &d_memory);
    memory.grad += d_memory;
    return (ctx.array() * r.array()).sum();
  });
}

namespace {

// Two sequences of unequal length so the masked carry path is exercised.
template <class Layer, class Cache>
GradCheck recurrent_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Layer layer("rnn", 3, 4, rng);
  const Matrix a = gaussian(rng, 4, 3);
  const Matrix b = gaussian(rng, 2, 3);
  auto seq = nn::SequenceBatch::pack({&a, &b}, 3);
  nn::Param input("input", seq.data);
  const Matrix r = gaussian(rng, seq.data.rows(), 4);
  nn::ParamList params;
  layer.collect(params);
  params.push_back(&input);
  return check_gradients(params, [&] {
    seq.data = input.value;
    Cache cache;
    const Matrix states = layer.forward(seq, &cache);
    input.grad += layer.backward(seq, cache, r);
    return (states.array() * r.array()).sum();
  });
}

}  // namespace

GradCheck gru_grad_check(std::uint64_t seed) { return recurrent_check<nn::Gru, nn::GruCache>(seed); }

GradCheck lstm_grad_check(std::uint64_t seed) { return recurrent_check<nn::Lstm, nn::LstmCache>(seed); }

GradCheck acoustic_grad_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  tts::AcousticModelConfig cfg;
  cfg.hidden = 3;
  cfg.layers = 2;
  cfg.speaker_dim = 2;
  cfg.seed = seed;
  cfg.speakers.names = {"a", "b"};
  tts::AcousticModel m(cfg);
  const auto ling = tts::text_to_linguistic("a cat", tts::Lexicon::shipped());
  std::vector<int> d1(ling.size(), 2);
  std::vector<int> d2(ling.size(), 1);
  const Matrix l1 = tts::upsample_linguistic(ling, d1);
  const Matrix l2 = tts::upsample_linguistic(ling, d2);
  std::vector<double> f1(static_cast<std::size_t>(l1.rows()), 150.0);
  std::vector<double> f2(static_cast<std::size_t>(l2.rows()), 0.0);
  f1[1] = 0.0;
  f2[0] = 210.0;
  const Matrix t1 = gaussian(rng, l1.rows(), tts::kAcousticDim);
  const Matrix t2 = gaussian(rng, l2.rows(), tts::kAcousticDim);
  const auto s1 = random_embedding(rng);
  const auto s2 = random_embedding(rng);
  const std::vector<int> speakers = {0, 1};
  return check_gradients(m.params(), [&] {
    const Matrix x1 = m.build_inputs(l1, f1, s1, 0);
    const Matrix x2 = m.build_inputs(l2, f2, s2, 1);
    return m.accumulate_gradients({&x1, &x2}, {&t1, &t2}, speakers);
  });
}

GradCheck vocoder_grad_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  tts::NeuralVocoderConfig cfg;
  cfg.hidden = 3;
  cfg.seed = seed;
  tts::NeuralVocoder m(cfg);
  const Matrix a = gaussian(rng, 5, 1 + tts::NeuralVocoder::kCondDim);
  const Matrix b = gaussian(rng, 3, 1 + tts::NeuralVocoder::kCondDim);
  std::uniform_int_distribution<int> level(0, tts::kMuLawLevels - 1);
  std::vector<std::vector<int>> targets(2);
  for (int i = 0; i < 5; ++i) targets[0].push_back(level(rng));
  for (int i = 0; i < 3; ++i) targets[1].push_back(level(rng));
  return check_gradients(m.params(), [&] { return m.accumulate_gradients({&a, &b}, targets); });
}

ClassifierData make_classifier_data(int n_per_class, double train_fraction, std::uint64_t seed, corpus::NormMode mode) {
  ClassifierData d;
  corpus::SyntheticOptions o;
  o.train_fraction = train_fraction;
  o.dev_fraction = 1.0 - train_fraction;
  d.corpus = corpus::generate_synthetic_corpus(corpus::default_synthetic_spec(), n_per_class, seed, o);
  d.provider = std::make_shared<corpus::HashEmbeddingProvider>(0);
  d.raw = model::extract_corpus_features(d.corpus, *d.provider);
  std::vector<corpus::FeatureBundle> train_raw;
  for (std::size_t i = 0; i < d.raw.size(); ++i)
    if (d.corpus.utterances[i].split == corpus::Split::kTrain) train_raw.push_back(d.raw[i]);
  d.stats = corpus::fit_normalizer(train_raw, "synthetic");
  for (std::size_t i = 0; i < d.raw.size(); ++i) {
    const auto& u = d.corpus.utterances[i];
    model::LabeledExample e{corpus::apply_normalizer(d.raw[i], d.stats, mode), style_index(*u.style_label), u.id};
    (u.split == corpus::Split::kTrain ? d.train : d.dev).push_back(std::move(e));
  }
  return d;
}

ToySystem build_toy_system(const ToyOptions& opt) {
  ToySystem s;
  s.data = make_classifier_data(opt.n_per_class, 0.7, opt.seed);
  model::TrainConfig tc;
  tc.max_epochs = opt.classifier_epochs;
  tc.seed = opt.seed;
  model::ClassifierConfig mc;
  mc.seed = opt.seed;
  s.classifier = model::train(model::StyleClassifier(mc), s.data.train, s.data.dev, tc);

  // The TTS corpus is the same synthetic corpus: adapt BN to all of it and
  // label every utterance.
  std::vector<corpus::FeatureBundle> target;
  for (const auto& f : s.data.raw) target.push_back(corpus::apply_normalizer(f, s.data.stats));
  const auto adapted = model::adapt_bn(s.classifier.model, target);
  s.labels = model::label_corpus(adapted, s.data.corpus, *s.data.provider, s.data.stats).records;
  std::map<std::string, StyleEmbedding> emb;
  for (const auto& r : s.labels) emb[r.id] = r.embedding;

  tts::TtsTrainConfig tcfg;
  tcfg.epochs = opt.tts_epochs;
  tcfg.prosody_hidden = opt.tts_hidden;
  tcfg.acoustic_hidden = opt.tts_hidden;
  tcfg.learning_rate = opt.tts_lr;
  tcfg.seed = opt.seed;
  tcfg.parallel = false;
  s.tts = tts::train_tts(s.data.corpus, emb, tts::Lexicon::shipped(), tcfg);

  s.bundle.tts = s.tts.models;
  s.bundle.lexicon = tts::Lexicon::shipped();
  s.bundle.extractor = pipeline::StyleExtractor{adapted, s.data.stats, corpus::NormMode::kBoth, s.data.provider};
  s.bundle.seed = opt.seed;
  return s;
}

double mean_synth_f0(const pipeline::ModelBundle& bundle, const StyleEmbedding& style) {
  double total = 0.0;
  const auto& sentences = corpus::neutral_sentences();
  for (const auto& text : sentences) {
    const auto r = pipeline::synthesize_with(text, style, "spk0", bundle);
    total += tts::mean_voiced_f0(tts::estimate_f0(r.audio));
  }
  return total / static_cast<double>(sentences.size());
}

}  // namespace styletts::testing
