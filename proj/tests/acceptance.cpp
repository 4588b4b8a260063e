// Acceptance checks, one PASS/FAIL line each. Exit status is nonzero when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "styletts/evalkit.hpp"
#include "styletts/pitch.hpp"
#include "styletts/vocoder.hpp"

using namespace styletts;
using namespace styletts::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  failures += !o.pass;
  std::printf("%s %-28s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), s, o.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string query_text(StyleLabel s) { return "i feel " + corpus::style_keywords(s)[0] + " today"; }

Outcome class_weight_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto w = model::class_weights({1145, 1814, 4481, 885, 140, 35});
  bool ok = w.w[style_index(StyleLabel::kNeutral)] == 4.0 &&
            std::abs(w.w[style_index(StyleLabel::kRushed)] - 8500.0 / 1145.0) < 1e-9;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> d(0, 10000);
  std::bernoulli_distribution zero(0.15);
  int agree = 0;
  for (int k = 0; k < 1000; ++k) {
    std::array<int, kNumStyles> c{};
    for (auto& v : c) v = zero(rng) ? 0 : d(rng);
    if (std::accumulate(c.begin(), c.end(), 0) == 0) c[0] = 1;
    agree += model::class_weights(c).w == oracle_class_weights(c, 0.25);
  }
  const double s = seconds_since(t0);
  ok = ok && agree == 1000 && s < 1.0;
  return {ok, fmt("w_neutral=%.1f w_rushed=%.12f oracle %.0f/1000", w.w[2], w.w[0], agree)};
}

Outcome metrics_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<long> d(0, 50);
  std::uniform_int_distribution<int> n(1, 5000);
  int agree = 0;
  for (int k = 0; k < 1000; ++k) {
    model::Confusion c{};
    for (auto& row : c)
      for (auto& v : row) v = d(rng);
    std::array<int, kNumStyles> counts{};
    for (auto& v : counts) v = n(rng);
    const auto w = model::class_weights(counts);
    const auto m = model::metrics_from_confusion(c, w);
    const auto o = oracle_accuracy(c, w.w);
    agree += m.unweighted_acc == o.unweighted && m.weighted_acc == o.weighted;
  }
  const double s = seconds_since(t0);
  return {agree == 1000 && s < 5.0, fmt("exact on %.0f/1000 matrices", agree)};
}

Outcome simplex() {
  std::mt19937_64 rng(103);
  model::ClassifierConfig cfg;
  cfg.audio_hidden = 16;
  cfg.text_hidden = 16;
  cfg.audio_dense = 16;
  double worst = 0.0;
  int off = 0;
  std::unique_ptr<model::StyleClassifier> m;
  for (int i = 0; i < 10000; ++i) {
    // A fresh random model every 100 passes.
    if (i % 100 == 0) {
      cfg.seed = static_cast<std::uint64_t>(i);
      m = std::make_unique<model::StyleClassifier>(cfg);
    }
    const auto f = random_bundle(rng, cfg, 1 + i % 6, i % 4, (i % 7) * 4.0 - 12.0);
    const auto e = m->embed(f);
    double sum = 0.0;
    bool neg = false;
    for (double v : e.p) {
      sum += v;
      neg = neg || v < 0.0;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
    off += neg || std::abs(sum - 1.0) > 1e-6;
  }
  return {off == 0, fmt("10000 passes, max |sum-1| = %.2e, off-simplex %.0f", worst, off)};
}

Outcome adabn() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(104);
  int identical = 0;
  double worst_mean = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto cfg = micro_classifier_config(static_cast<std::uint64_t>(trial));
    cfg.audio_hidden = 5;
    model::StyleClassifier m(cfg);
    m.batch_norm().beta().value.setRandom();
    m.batch_norm().gamma().value.array() += 0.5;
    std::vector<corpus::FeatureBundle> target;
    const double shift = 1.0 + trial % 5;
    for (int i = 0; i < 24; ++i) target.push_back(random_bundle(rng, cfg, 2 + i % 4, 1 + i % 3, shift));
    auto adapted = model::adapt_bn(m, target);
    const auto before = m.params();
    const auto after = adapted.params();
    bool same = before.size() == after.size();
    for (std::size_t k = 0; same && k < before.size(); ++k) same = before[k]->value == after[k]->value;
    identical += same;
    std::vector<const corpus::FeatureBundle*> batch;
    for (const auto& f : target) batch.push_back(&f);
    const auto y = adapted.batch_norm().forward_inference(adapted.pre_bn(batch));
    const Eigen::RowVectorXd mean = y.colwise().mean();
    worst_mean = std::max(worst_mean, (mean - adapted.batch_norm().beta().value).cwiseAbs().maxCoeff());
  }
  const double s = seconds_since(t0);
  return {identical == 100 && worst_mean < 1e-2 && s < 30.0,
          fmt("params identical %.0f/100, max |mean-beta| = %.2e", identical, worst_mean)};
}

Outcome gradients() {
  struct Named {
    const char* name;
    GradCheck g;
  };
  std::vector<Named> all = {{"classifier", classifier_grad_check(1)},
                            {"prosody", prosody_grad_check(2)},
                            {"attention", attention_grad_check(3)},
                            {"gru", gru_grad_check(4)},
                            {"lstm", lstm_grad_check(5)},
                            {"acoustic", acoustic_grad_check(6)},
                            {"vocoder", vocoder_grad_check(7)}};
  bool ok = true;
  std::ostringstream out;
  for (const auto& n : all) {
    ok = ok && n.g.max_rel_error < 1e-4;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s %.1e ", n.name, n.g.max_rel_error);
    out << buf;
  }
  return {ok, "max rel err: " + out.str()};
}

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  auto data = make_classifier_data(30, 2.0 / 3.0, 105);
  model::TrainConfig tc;
  tc.max_epochs = 200;
  tc.seed = 1;
  const auto r = model::train(model::StyleClassifier(model::ClassifierConfig{}), data.train, data.dev, tc);
  const auto tr = model::evaluate(r.model, data.train, r.weights);
  const auto dv = model::evaluate(r.model, data.dev, r.weights);
  const double s = seconds_since(t0);
  const bool sizes = data.train.size() == 120 && data.dev.size() == 60;
  return {sizes && tr.unweighted_acc >= 0.95 && dv.unweighted_acc >= 0.5 && s < 300.0,
          fmt("train %.1f%%, dev %.1f%% (best epoch %.0f)", 100 * tr.unweighted_acc, 100 * dv.unweighted_acc,
              r.best_epoch)};
}

Outcome closed_loop() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sys = build_toy_system(ToyOptions{});
  const double happy = mean_synth_f0(sys.bundle, pipeline::make_style_embedding(StyleLabel::kHappy));
  const double neutral = mean_synth_f0(sys.bundle, pipeline::make_style_embedding(StyleLabel::kNeutral));
  const auto& spec = corpus::default_synthetic_spec();
  const auto hq = corpus::render_styled_speech(query_text(StyleLabel::kHappy), spec.at(StyleLabel::kHappy), 1001);
  const auto sq = corpus::render_styled_speech(query_text(StyleLabel::kSad), spec.at(StyleLabel::kSad), 1002);
  const std::string reply = "the book is on the table";
  const auto hr = pipeline::respond(hq, query_text(StyleLabel::kHappy), reply, sys.bundle);
  const auto sr = pipeline::respond(sq, query_text(StyleLabel::kSad), reply, sys.bundle);
  const double hf = tts::mean_voiced_f0(tts::estimate_f0(hr.audio));
  const double sf = tts::mean_voiced_f0(tts::estimate_f0(sr.audio));
  const double s = seconds_since(t0);
  return {happy - neutral > 10.0 && hf - sf > 5.0 && s < 900.0,
          fmt("happy-neutral %.1f Hz, happy-query minus sad-query response %.1f Hz", happy - neutral, hf - sf)};
}

Outcome dsp_round_trip() {
  const tts::AcousticFrames frames{Eigen::MatrixXd::Zero(100, tts::kAcousticDim)};
  const auto w = tts::vocode_dsp(frames, std::vector<double>(100, 110.0));
  const double f0 = tts::mean_voiced_f0(tts::estimate_f0(w));
  const long n = static_cast<long>(w.size());
  return {w.rate == 24000 && std::abs(n - 24000) <= 240 && std::abs(f0 - 110.0) / 110.0 < 0.05,
          fmt("F0 %.2f Hz, %.0f samples at %.0f Hz", f0, static_cast<double>(n), w.rate)};
}

Outcome abx_arithmetic() {
  eval::AbxPool pool;
  for (auto s : kAllStyles)
    for (int i = 0; i < 2; ++i) pool[s].push_back(std::string(style_name(s)) + std::to_string(i) + ".wav");
  const auto items = eval::build_abx({kAllStyles.begin(), kAllStyles.end()}, pool, 1);
  std::vector<eval::AbxAnswer> log;
  int k = 0;
  for (int l = 0; l < 22; ++l)
    for (const auto& it : items) {
      const bool right = k++ < 272;
      const auto wrong = it.correct == eval::AbxChoice::kA ? eval::AbxChoice::kB : eval::AbxChoice::kA;
      log.push_back({"s" + std::to_string(l), it.id, right ? it.correct : wrong, ""});
    }
  const auto a = eval::score_abx(log, items);
  const auto p = eval::score_preference_counts({140, 271, 89});
  const bool ok = items.size() == 15 && std::abs(a.accuracy - 82.42) <= 0.01 &&
                  std::abs(p.percent[0] - 28.0) < 0.05 && std::abs(p.percent[1] - 54.2) < 0.05 &&
                  std::abs(p.percent[2] - 17.8) < 0.05;
  return {ok, fmt("%.0f items, ABX %.2f%%, preference %.1f/%.1f", static_cast<double>(items.size()), a.accuracy,
                  p.percent[0], p.percent[1]) +
                  fmt("/%.1f%%", p.percent[2])};
}

Outcome normalization_ablation() {
  std::ostringstream out;
  bool ok = true;
  for (auto mode : {corpus::NormMode::kNone, corpus::NormMode::kMfcc, corpus::NormMode::kProsody,
                    corpus::NormMode::kBoth}) {
    auto data = make_classifier_data(10, 0.7, 106, mode);
    model::TrainConfig tc;
    tc.max_epochs = 20;
    tc.seed = 2;
    model::ClassifierConfig mc;
    mc.audio_hidden = 32;
    mc.text_hidden = 32;
    mc.audio_dense = 32;
    const auto r = model::train(model::StyleClassifier(mc), data.train, data.dev, tc);
    const auto m = model::evaluate(r.model, data.dev, r.weights);
    ok = ok && std::isfinite(m.unweighted_acc) && std::isfinite(m.weighted_acc);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s wa=%.3f ua=%.3f; ", std::string(corpus::norm_mode_name(mode)).c_str(),
                  m.weighted_acc, m.unweighted_acc);
    out << buf;
  }
  return {ok, out.str()};
}

Outcome determinism() {
  // Classifier training.
  auto data = make_classifier_data(3, 0.67, 107);
  model::TrainConfig tc;
  tc.max_epochs = 8;
  tc.seed = 3;
  model::ClassifierConfig mc;
  mc.audio_hidden = 16;
  mc.text_hidden = 16;
  mc.audio_dense = 16;
  auto c1 = model::train(model::StyleClassifier(mc), data.train, data.dev, tc);
  auto c2 = model::train(model::StyleClassifier(mc), data.train, data.dev, tc);
  bool clf_same =
      c1.history.size() == c2.history.size() && nn::checksum(c1.model.params()) == nn::checksum(c2.model.params());
  for (std::size_t i = 0; clf_same && i < c1.history.size(); ++i)
    clf_same = c1.history[i].train_loss == c2.history[i].train_loss &&
               c1.history[i].dev_weighted_acc == c2.history[i].dev_weighted_acc;

  // TTS training and synthesis.
  std::map<std::string, StyleEmbedding> emb;
  for (const auto& u : data.corpus.utterances) emb[u.id] = pipeline::make_style_embedding(*u.style_label);
  tts::TtsTrainConfig cfg;
  cfg.epochs = 6;
  cfg.prosody_hidden = 16;
  cfg.acoustic_hidden = 16;
  cfg.seed = 5;
  const auto t1 = tts::train_tts(data.corpus, emb, tts::Lexicon::shipped(), cfg);
  cfg.parallel = false;
  const auto t2 = tts::train_tts(data.corpus, emb, tts::Lexicon::shipped(), cfg);
  bool tts_same = t1.history.size() == t2.history.size();
  for (std::size_t i = 0; tts_same && i < t1.history.size(); ++i)
    tts_same = t1.history[i].total() == t2.history[i].total();

  pipeline::ModelBundle b1{t1.models, tts::Lexicon::shipped()};
  pipeline::ModelBundle b2{t2.models, tts::Lexicon::shipped()};
  const auto e = pipeline::make_style_embedding(StyleLabel::kAngry);
  const auto a1 = encode_wav(pipeline::synthesize_with("the cat is on the mat", e, "spk0", b1).audio);
  const auto a2 = encode_wav(pipeline::synthesize_with("the cat is on the mat", e, "spk0", b2).audio);
  const bool audio_same = a1 == a2 && !a1.empty();
  return {clf_same && tts_same && audio_same,
          std::string("classifier ") + (clf_same ? "same" : "differs") + ", tts " + (tts_same ? "same" : "differs") +
              ", dsp audio bytes " + (audio_same ? "same" : "differ")};
}

}  // namespace

int main() {
  criterion("class_weight_oracle", class_weight_oracle);
  criterion("metrics_oracle", metrics_oracle);
  criterion("simplex", simplex);
  criterion("adabn_invariance", adabn);
  criterion("gradient_checks", gradients);
  criterion("classifier_overfit", overfit);
  criterion("closed_loop_style_transfer", closed_loop);
  criterion("dsp_vocoder_round_trip", dsp_round_trip);
  criterion("abx_arithmetic", abx_arithmetic);
  criterion("normalization_ablation", normalization_ablation);
  criterion("determinism", determinism);
  std::printf("%d of 11 failed\n", failures);
  return failures == 0 ? 0 : 1;
}
