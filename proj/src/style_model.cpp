#include "styletts/style_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "styletts/error.hpp"
#include "styletts/nn/optim.hpp"

namespace styletts::model {

using nlohmann::json;
using nn::SequenceBatch;

ClassWeights class_weights(const std::array<int, kNumStyles>& train_counts, double cap) {
  long total = 0;
  for (int c : train_counts) {
    if (c < 0) throw Error("class_weights: negative count");
    total += c;
  }
  if (total == 0) throw Error("class_weights: all class counts are zero");
  ClassWeights cw;
  cw.cap = cap;
  for (int i = 0; i < kNumStyles; ++i) {
    const int count = train_counts[static_cast<std::size_t>(i)];
    if (count == 0) continue;
    double prior = static_cast<double>(count) / static_cast<double>(total);
    if (i == style_index(StyleLabel::kNeutral)) prior = std::min(prior, cap);
    cw.w[static_cast<std::size_t>(i)] = 1.0 / prior;
  }
  return cw;
}

Metrics metrics_from_confusion(const Confusion& confusion, const ClassWeights& weights) {
  Metrics m;
  m.confusion = confusion;
  long total = 0;
  long correct = 0;
  double wsum = 0.0;
  double wacc = 0.0;
  for (int c = 0; c < kNumStyles; ++c) {
    const auto& row = confusion[static_cast<std::size_t>(c)];
    const long n = std::accumulate(row.begin(), row.end(), 0L);
    total += n;
    correct += row[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    const double recall = static_cast<double>(row[static_cast<std::size_t>(c)]) / static_cast<double>(n);
    m.per_class_recall[static_cast<std::size_t>(c)] = recall;
    wsum += weights.w[static_cast<std::size_t>(c)];
    wacc += weights.w[static_cast<std::size_t>(c)] * recall;
  }
  m.unweighted_acc = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  m.weighted_acc = wsum > 0.0 ? wacc / wsum : 0.0;
  return m;
}

std::string ClassifierConfig::to_json() const {
  return json{{"mfcc_dim", mfcc_dim},       {"prosody_dim", prosody_dim}, {"token_dim", token_dim},
              {"audio_hidden", audio_hidden}, {"text_hidden", text_hidden}, {"audio_dense", audio_dense},
              {"bn_momentum", bn_momentum}, {"seed", seed}}
      .dump();
}

ClassifierConfig ClassifierConfig::from_json(const std::string& text) {
  const auto j = json::parse(text);
  ClassifierConfig c;
  c.mfcc_dim = j.at("mfcc_dim").get<int>();
  c.prosody_dim = j.at("prosody_dim").get<int>();
  c.token_dim = j.at("token_dim").get<int>();
  c.audio_hidden = j.at("audio_hidden").get<int>();
  c.text_hidden = j.at("text_hidden").get<int>();
  c.audio_dense = j.at("audio_dense").get<int>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

StyleClassifier::StyleClassifier(const ClassifierConfig& cfg) : cfg_(cfg) {
  if (cfg.audio_hidden <= 0 || cfg.text_hidden <= 0 || cfg.audio_dense <= 0) {
    throw Error("classifier hidden sizes must be positive");
  }
  nn::Rng rng(cfg.seed);
  audio_rnn_ = nn::Gru("audio_rnn", cfg.mfcc_dim, cfg.audio_hidden, rng);
  audio_dense_ = nn::Dense("audio_dense", cfg.audio_hidden + cfg.prosody_dim, cfg.audio_dense, rng);
  text_rnn_ = nn::Gru("text_rnn", cfg.token_dim, cfg.text_hidden, rng);
  bn_ = nn::BatchNorm("bn", cfg.audio_dense + cfg.text_hidden, cfg.bn_momentum);
  head_ = nn::Dense("head", cfg.audio_dense + cfg.text_hidden, kNumStyles, rng);
}

struct StyleClassifier::Encoded {
  SequenceBatch audio_seq;
  SequenceBatch text_seq;
  nn::GruCache audio_cache;
  nn::GruCache text_cache;
  Matrix audio_in;    // final audio state ++ prosody
  Matrix audio_code;  // tanh(dense(audio_in))
  Matrix joint;       // audio_code ++ final text state
};

void StyleClassifier::check_shapes(const corpus::FeatureBundle& f) const {
  if (f.mfcc.rows() == 0) throw ShapeError("classifier input has no MFCC frames");
  if (f.mfcc.cols() != cfg_.mfcc_dim) {
    throw ShapeError("classifier expects " + std::to_string(cfg_.mfcc_dim) + " MFCC dims, got " +
                     std::to_string(f.mfcc.cols()));
  }
  if (f.prosody.size() != cfg_.prosody_dim) {
    throw ShapeError("classifier expects prosody length " + std::to_string(cfg_.prosody_dim) + ", got " +
                     std::to_string(f.prosody.size()));
  }
  if (f.token_embeddings.rows() > 0 && f.token_embeddings.cols() != cfg_.token_dim) {
    throw ShapeError("classifier expects token width " + std::to_string(cfg_.token_dim));
  }
}

StyleClassifier::Encoded StyleClassifier::encode(std::span<const corpus::FeatureBundle* const> batch,
                                                 bool keep_cache) const {
  if (batch.empty()) throw Error("classifier: empty batch");
  const int b = static_cast<int>(batch.size());
  std::vector<const Matrix*> mfcc;
  std::vector<const Matrix*> tokens;
  for (const auto* f : batch) {
    check_shapes(*f);
    mfcc.push_back(&f->mfcc);
    tokens.push_back(&f->token_embeddings);
  }
  Encoded e;
  e.audio_seq = SequenceBatch::pack(mfcc, cfg_.mfcc_dim);
  e.text_seq = SequenceBatch::pack(tokens, cfg_.token_dim);
  const Matrix audio_states = audio_rnn_.forward(e.audio_seq, keep_cache ? &e.audio_cache : nullptr);
  const Matrix text_states = text_rnn_.forward(e.text_seq, keep_cache ? &e.text_cache : nullptr);
  e.audio_in.resize(b, cfg_.audio_hidden + cfg_.prosody_dim);
  e.audio_in.leftCols(cfg_.audio_hidden) = nn::last_states(audio_states, b);
  for (int i = 0; i < b; ++i) {
    e.audio_in.row(i).rightCols(cfg_.prosody_dim) = batch[static_cast<std::size_t>(i)]->prosody.transpose();
  }
  e.audio_code = nn::tanh_forward(audio_dense_.forward(e.audio_in));
  e.joint.resize(b, cfg_.audio_dense + cfg_.text_hidden);
  e.joint << e.audio_code, nn::last_states(text_states, b);
  return e;
}

Matrix StyleClassifier::pre_bn(std::span<const corpus::FeatureBundle* const> batch) const {
  return encode(batch, false).joint;
}

Matrix StyleClassifier::logits(std::span<const corpus::FeatureBundle* const> batch) const {
  return head_.forward(bn_.forward_inference(pre_bn(batch)));
}

StyleEmbedding StyleClassifier::embed(const corpus::FeatureBundle& f) const {
  const corpus::FeatureBundle* one[] = {&f};
  const Matrix p = nn::softmax_rows(logits(one));
  StyleEmbedding e;
  for (int i = 0; i < kNumStyles; ++i) e.p[static_cast<std::size_t>(i)] = p(0, i);
  return e;
}

double StyleClassifier::accumulate_gradients(std::span<const corpus::FeatureBundle* const> batch,
                                             std::span<const int> labels, const ClassWeights& weights) {
  Encoded e = encode(batch, true);
  nn::BatchNormCache bn_cache;
  const Matrix normed = bn_.forward_train(e.joint, &bn_cache);
  const Matrix out = head_.forward(normed);
  Matrix d_logits;
  const double l = nn::weighted_softmax_cross_entropy(out, labels, weights.w, &d_logits);

  const Matrix d_normed = head_.backward(normed, d_logits);
  const Matrix d_joint = bn_.backward(bn_cache, d_normed);
  const int b = static_cast<int>(batch.size());
  const Matrix d_code = d_joint.leftCols(cfg_.audio_dense);
  const Matrix d_text_last = d_joint.rightCols(cfg_.text_hidden);
  const Matrix d_audio_in = audio_dense_.backward(e.audio_in, nn::tanh_backward(e.audio_code, d_code));

  Matrix d_audio_states = Matrix::Zero(e.audio_seq.data.rows(), cfg_.audio_hidden);
  d_audio_states.bottomRows(b) = d_audio_in.leftCols(cfg_.audio_hidden);
  audio_rnn_.backward(e.audio_seq, e.audio_cache, d_audio_states);

  Matrix d_text_states = Matrix::Zero(e.text_seq.data.rows(), cfg_.text_hidden);
  d_text_states.bottomRows(b) = d_text_last;
  text_rnn_.backward(e.text_seq, e.text_cache, d_text_states);
  return l;
}

nn::ParamList StyleClassifier::params() {
  nn::ParamList p;
  audio_rnn_.collect(p);
  audio_dense_.collect(p);
  text_rnn_.collect(p);
  bn_.collect(p);
  head_.collect(p);
  return p;
}

nn::Checkpoint StyleClassifier::to_checkpoint() const {
  nn::Checkpoint c;
  c.kind = "style_classifier";
  c.config = cfg_.to_json();
  c.put(const_cast<StyleClassifier*>(this)->params());
  c.tensors["bn.running_mean"] = bn_.running_mean();
  c.tensors["bn.running_var"] = bn_.running_var();
  return c;
}

StyleClassifier StyleClassifier::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != "style_classifier") throw ParseError("checkpoint is not a style classifier");
  StyleClassifier m(ClassifierConfig::from_json(ckpt.config));
  ckpt.get(m.params());
  const Matrix& mean = ckpt.tensor("bn.running_mean");
  const Matrix& var = ckpt.tensor("bn.running_var");
  if (mean.size() != m.bn_.features() || var.size() != m.bn_.features()) {
    throw ParseError("checkpoint BN statistics have the wrong width");
  }
  m.bn_.running_mean() = mean.row(0);
  m.bn_.running_var() = var.row(0);
  return m;
}

void StyleClassifier::save(const std::filesystem::path& path) const { to_checkpoint().save(path); }

StyleClassifier StyleClassifier::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::Checkpoint::load(path, "style_classifier"));
}

double loss(std::span<const double> logits, int label, const ClassWeights& weights) {
  if (logits.size() != kNumStyles) throw ShapeError("loss expects six logits");
  Matrix row(1, kNumStyles);
  for (int i = 0; i < kNumStyles; ++i) row(0, i) = logits[static_cast<std::size_t>(i)];
  const int labels[] = {label};
  return nn::weighted_softmax_cross_entropy(row, labels, weights.w, nullptr);
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(std::max(2, batch_size));
  for (std::size_t i = 0; i < order.size(); i += bs) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
  }
  // Batch statistics need two samples.
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = batches.back();
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

Confusion confusion_of(const StyleClassifier& model, const std::vector<LabeledExample>& examples) {
  Confusion conf{};
  constexpr std::size_t kChunk = 64;
  for (std::size_t i = 0; i < examples.size(); i += kChunk) {
    std::vector<const corpus::FeatureBundle*> batch;
    for (std::size_t j = i; j < std::min(examples.size(), i + kChunk); ++j) batch.push_back(&examples[j].features);
    const Matrix out = model.logits(batch);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      Eigen::Index pred = 0;
      out.row(r).maxCoeff(&pred);
      const int truth = examples[i + static_cast<std::size_t>(r)].label;
      ++conf[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    }
  }
  return conf;
}

}  // namespace

Metrics evaluate(const StyleClassifier& model, const std::vector<LabeledExample>& examples,
                 const ClassWeights& weights) {
  if (examples.empty()) throw Error("evaluate: no labeled examples");
  for (const auto& e : examples) {
    if (e.label < 0 || e.label >= kNumStyles) throw Error("evaluate: example \"" + e.id + "\" has no valid label");
  }
  return metrics_from_confusion(confusion_of(model, examples), weights);
}

TrainResult train(StyleClassifier model, const std::vector<LabeledExample>& train_set,
                  const std::vector<LabeledExample>& dev_set, const TrainConfig& cfg) {
  if (train_set.empty()) throw Error("train: empty training set");
  if (train_set.size() < 2) throw Error("train: batch normalization needs at least two training samples");
  std::array<int, kNumStyles> counts{};
  for (const auto& e : train_set) {
    if (e.label < 0 || e.label >= kNumStyles) throw Error("train: example \"" + e.id + "\" has no valid label");
    ++counts[static_cast<std::size_t>(e.label)];
  }
  TrainResult result{model, {}, class_weights(counts, cfg.neutral_cap), 0};
  nn::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  nn::Adam adam(acfg);
  nn::Rng rng(cfg.seed);
  auto params = model.params();

  double best_dev = -1.0;
  double best_loss = 0.0;
  int since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (const auto& idx : make_batches(order, cfg.batch_size)) {
      std::vector<const corpus::FeatureBundle*> batch;
      std::vector<int> labels;
      for (std::size_t i : idx) {
        batch.push_back(&train_set[i].features);
        labels.push_back(train_set[i].label);
      }
      loss_sum += model.accumulate_gradients(batch, labels, result.weights) * static_cast<double>(idx.size());
      adam.step(params);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_unweighted_acc = evaluate(model, train_set, result.weights).unweighted_acc;
    if (!dev_set.empty()) {
      const Metrics dev = evaluate(model, dev_set, result.weights);
      rec.dev_weighted_acc = dev.weighted_acc;
      rec.dev_unweighted_acc = dev.unweighted_acc;
    } else {
      // Without a dev set the training accuracy drives selection.
      rec.dev_weighted_acc = evaluate(model, train_set, result.weights).weighted_acc;
      rec.dev_unweighted_acc = rec.train_unweighted_acc;
    }
    result.history.push_back(rec);

    const bool better = rec.dev_weighted_acc > best_dev + 1e-12 ||
                        (std::abs(rec.dev_weighted_acc - best_dev) <= 1e-12 && rec.train_loss < best_loss);
    if (better) {
      if (rec.dev_weighted_acc > best_dev + 1e-12) since_best = 0;
      best_dev = rec.dev_weighted_acc;
      best_loss = rec.train_loss;
      result.model = model;
      result.best_epoch = epoch;
    } else {
      ++since_best;
    }
    if (cfg.patience > 0 && since_best >= cfg.patience) break;
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write history: " + path.string());
  out << "epoch,train_loss,dev_weighted_acc,dev_unweighted_acc\n";
  out.precision(10);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.dev_weighted_acc << ',' << r.dev_unweighted_acc << "\n";
  }
}

StyleClassifier adapt_bn(const StyleClassifier& model, const std::vector<corpus::FeatureBundle>& target) {
  if (target.empty()) throw Error("adapt_bn: empty target corpus");
  StyleClassifier adapted = model;
  const int width = model.batch_norm().features();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(width);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(width);
  std::vector<Matrix> chunks;
  constexpr std::size_t kChunk = 64;
  for (std::size_t i = 0; i < target.size(); i += kChunk) {
    std::vector<const corpus::FeatureBundle*> batch;
    for (std::size_t j = i; j < std::min(target.size(), i + kChunk); ++j) batch.push_back(&target[j]);
    chunks.push_back(model.pre_bn(batch));
    sum += chunks.back().colwise().sum();
  }
  const auto n = static_cast<double>(target.size());
  const Eigen::RowVectorXd mean = sum / n;
  for (const Matrix& c : chunks) sq += (c.rowwise() - mean).array().square().colwise().sum().matrix();
  adapted.batch_norm().running_mean() = mean;
  adapted.batch_norm().running_var() = target.size() > 1 ? Eigen::RowVectorXd(sq / (n - 1.0))
                                                          : Eigen::RowVectorXd::Zero(width);
  return adapted;
}

std::vector<corpus::FeatureBundle> extract_corpus_features(const corpus::Corpus& c,
                                                           const corpus::EmbeddingProvider& provider) {
  std::vector<corpus::FeatureBundle> out;
  out.reserve(c.size());
  for (const auto& u : c.utterances) {
    out.push_back(corpus::extract_features(corpus::load_audio(c, u), u.text, provider));
  }
  return out;
}

std::vector<LabeledExample> prepare_examples(const corpus::Corpus& c, const corpus::EmbeddingProvider& provider,
                                             const corpus::NormStats* stats, corpus::NormMode mode) {
  std::vector<LabeledExample> out;
  for (const auto& u : c.utterances) {
    if (!u.style_label) continue;
    LabeledExample e;
    e.id = u.id;
    e.label = style_index(*u.style_label);
    e.features = corpus::extract_features(corpus::load_audio(c, u), u.text, provider);
    if (stats) e.features = corpus::apply_normalizer(e.features, *stats, mode);
    out.push_back(std::move(e));
  }
  return out;
}

LabelingResult label_corpus(const StyleClassifier& model, const corpus::Corpus& c,
                            const corpus::EmbeddingProvider& provider, const corpus::NormStats& stats,
                            corpus::NormMode mode) {
  LabelingResult result;
  for (const auto& u : c.utterances) {
    try {
      const auto f = corpus::apply_normalizer(
          corpus::extract_features(corpus::load_audio(c, u), u.text, provider), stats, mode);
      EmbeddingRecord r;
      r.id = u.id;
      r.embedding = model.embed(f);
      r.argmax_label = r.embedding.argmax();
      result.records.push_back(r);
    } catch (const std::exception& ex) {
      result.errors.push_back({u.id, ex.what()});
    }
  }
  return result;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write embeddings: " + path.string());
  for (const auto& r : records) {
    json j = {{"id", r.id},
              {"embedding", std::vector<double>(r.embedding.p.begin(), r.embedding.p.end())},
              {"argmax_label", std::string(style_name(r.argmax_label))}};
    out << j.dump() << "\n";
  }
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read embeddings: " + path.string());
  std::vector<EmbeddingRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      EmbeddingRecord r;
      r.id = j.at("id").get<std::string>();
      const auto v = j.at("embedding").get<std::vector<double>>();
      if (v.size() != kNumStyles) throw ParseError("embedding must have 6 entries");
      std::copy(v.begin(), v.end(), r.embedding.p.begin());
      const auto label = parse_style(j.at("argmax_label").get<std::string>());
      r.argmax_label = label ? *label : r.embedding.argmax();
      out.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace styletts::model
