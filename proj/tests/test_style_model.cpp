#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "styletts/error.hpp"
#include "styletts/nn/checkpoint.hpp"
#include "styletts/style_model.hpp"

using namespace styletts;
using namespace styletts::model;
using styletts::testing::TempDir;

TEST_SUITE("style_model") {
  TEST_CASE("class weights from the TTS train counts") {
    const auto w = class_weights({1145, 1814, 4481, 885, 140, 35});
    CHECK(w.w[style_index(StyleLabel::kNeutral)] == 4.0);
    CHECK(std::abs(w.w[style_index(StyleLabel::kRushed)] - 8500.0 / 1145.0) < 1e-9);
    CHECK(std::abs(w.w[style_index(StyleLabel::kSad)] - 8500.0 / 35.0) < 1e-9);
    CHECK(w.w[style_index(StyleLabel::kSad)] == doctest::Approx(242.857).epsilon(1e-5));
  }

  TEST_CASE("class weights edge cases") {
    const auto u = class_weights({7, 7, 7, 7, 7, 7});
    for (double v : u.w) CHECK(v == doctest::Approx(6.0).epsilon(1e-12));
    const auto single = class_weights({0, 0, 10, 0, 0, 0});
    CHECK(single.w == std::array<double, kNumStyles>{0, 0, 4.0, 0, 0, 0});
    CHECK_THROWS_AS(class_weights({0, 0, 0, 0, 0, 0}), Error);
  }

  TEST_CASE("class weights match the oracle on random counts") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> d(0, 5000);
    std::bernoulli_distribution zero(0.2);
    for (int k = 0; k < 200; ++k) {
      std::array<int, kNumStyles> c{};
      for (auto& v : c) v = zero(rng) ? 0 : d(rng);
      if (std::accumulate(c.begin(), c.end(), 0) == 0) c[2] = 1;
      CHECK(class_weights(c).w == testing::oracle_class_weights(c, 0.25));
    }
  }

  TEST_CASE("two-class toy metrics") {
    Confusion c{};
    const int n = style_index(StyleLabel::kNeutral);
    const int h = style_index(StyleLabel::kHappy);
    c[n][n] = 60;
    c[n][h] = 15;
    c[h][h] = 15;
    c[h][n] = 10;
    const auto w = class_weights({0, 0, 75, 25, 0, 0});
    CHECK(w.w[n] == 4.0);
    CHECK(w.w[h] == 4.0);
    const auto m = metrics_from_confusion(c, w);
    CHECK(m.weighted_acc == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(m.unweighted_acc == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_FALSE(m.per_class_recall[0].has_value());
    CHECK(*m.per_class_recall[n] == doctest::Approx(0.8));
  }

  TEST_CASE("perfect predictions") {
    Confusion c{};
    for (int i = 0; i < kNumStyles; ++i) c[i][i] = 3 + i;
    const auto m = metrics_from_confusion(c, class_weights({3, 4, 5, 6, 7, 8}));
    CHECK(m.weighted_acc == 1.0);
    CHECK(m.unweighted_acc == 1.0);
  }

  TEST_CASE("metrics match the brute-force oracle") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<long> d(0, 30);
    for (int k = 0; k < 200; ++k) {
      Confusion c{};
      for (auto& row : c)
        for (auto& v : row) v = d(rng);
      std::array<int, kNumStyles> counts{};
      for (auto& v : counts) v = static_cast<int>(d(rng)) + 1;
      const auto w = class_weights(counts);
      const auto m = metrics_from_confusion(c, w);
      const auto o = testing::oracle_accuracy(c, w.w);
      CHECK(m.unweighted_acc == o.unweighted);
      CHECK(m.weighted_acc == o.weighted);
    }
  }

  TEST_CASE("loss values") {
    const ClassWeights ones{{1, 1, 1, 1, 1, 1}};
    const std::array<double, kNumStyles> uniform{};
    CHECK(loss(uniform, 2, ones) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    std::array<double, kNumStyles> sure{};
    sure[4] = 1e6;
    CHECK(loss(sure, 4, ones) < 1e-12);
    const std::array<double, kNumStyles> some = {0.3, -1.0, 2.0, 0.1, 0.0, 0.5};
    ClassWeights two = ones;
    two.w[1] = 2.0;
    CHECK(loss(some, 1, two) == doctest::Approx(2.0 * loss(some, 1, ones)).epsilon(1e-12));
    ClassWeights zero = ones;
    zero.w[3] = 0.0;
    CHECK_THROWS_AS(loss(some, 3, zero), Error);
  }

  TEST_CASE("embeddings are on the simplex and deterministic") {
    std::mt19937_64 rng(3);
    model::ClassifierConfig cfg;
    cfg.audio_hidden = 16;
    cfg.text_hidden = 16;
    cfg.audio_dense = 16;
    StyleClassifier m(cfg);
    for (int i = 0; i < 50; ++i) {
      const auto f = testing::random_bundle(rng, cfg, 3 + i % 7, i % 4, (i % 5) * 3.0);
      const auto e = m.embed(f);
      CHECK(on_simplex(e));
      for (double v : e.p) CHECK(v >= 0.0);
      CHECK(m.embed(f) == e);
    }
  }

  TEST_CASE("shape mismatch is rejected") {
    StyleClassifier m;
    corpus::FeatureBundle f;
    f.mfcc = Eigen::MatrixXd::Zero(4, 20);
    f.prosody = Eigen::VectorXd::Zero(corpus::kProsodyDim);
    CHECK_THROWS_AS(m.embed(f), ShapeError);
  }

  TEST_CASE("classifier gradients match finite differences") {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto g = testing::classifier_grad_check(seed);
      CAPTURE(g.worst);
      CHECK(g.max_rel_error < 1e-4);
      CHECK(g.entries > 100);
    }
  }

  TEST_CASE("adapt_bn leaves everything but BN statistics untouched") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      auto cfg = testing::micro_classifier_config(static_cast<std::uint64_t>(trial));
      cfg.audio_hidden = 5;
      StyleClassifier m(cfg);
      // Nonzero scale and shift so the beta check means something.
      m.batch_norm().beta().value.setRandom();
      m.batch_norm().gamma().value.array() += 0.5;
      std::vector<corpus::FeatureBundle> target;
      for (int i = 0; i < 20; ++i) target.push_back(testing::random_bundle(rng, cfg, 2 + i % 3, 1 + i % 2, 1.5));
      auto adapted = adapt_bn(m, target);
      const auto before = m.params();
      const auto after = adapted.params();
      REQUIRE(before.size() == after.size());
      for (std::size_t k = 0; k < before.size(); ++k) CHECK(before[k]->value == after[k]->value);
      CHECK(nn::checksum(before) == nn::checksum(after));
      CHECK(adapted.batch_norm().running_mean() != m.batch_norm().running_mean());

      // Post-BN mean over the target equals beta.
      std::vector<const corpus::FeatureBundle*> batch;
      for (const auto& f : target) batch.push_back(&f);
      const auto y = adapted.batch_norm().forward_inference(adapted.pre_bn(batch));
      const Eigen::RowVectorXd mean = y.colwise().mean();
      CHECK((mean - adapted.batch_norm().beta().value).cwiseAbs().maxCoeff() < 1e-2);
    }
  }

  TEST_CASE("adapt_bn uses the unbiased variance") {
    std::mt19937_64 rng(5);
    const auto cfg = testing::micro_classifier_config(5);
    StyleClassifier m(cfg);
    std::vector<corpus::FeatureBundle> target;
    for (int i = 0; i < 7; ++i) target.push_back(testing::random_bundle(rng, cfg, 3, 2));
    const auto adapted = adapt_bn(m, target);
    std::vector<const corpus::FeatureBundle*> batch;
    for (const auto& f : target) batch.push_back(&f);
    const auto x = m.pre_bn(batch);
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mu).array().square().colwise().sum() / (x.rows() - 1.0);
    CHECK((adapted.batch_norm().running_mean() - mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((adapted.batch_norm().running_var() - var).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(adapt_bn(m, {}), Error);
  }

  TEST_CASE("adapt_bn on the training data is a near fixed point") {
    // Running statistics accumulated over many training-mode batches of the
    // same data approach the full-data statistics.
    std::mt19937_64 rng(6);
    const auto cfg = testing::micro_classifier_config(6);
    StyleClassifier m(cfg);
    std::vector<corpus::FeatureBundle> data;
    for (int i = 0; i < 1024; ++i) data.push_back(testing::random_bundle(rng, cfg, 2 + i % 3, 1 + i % 3));
    const auto w = class_weights({1, 1, 1, 1, 1, 1});
    constexpr std::size_t kBatch = 512;
    std::vector<int> labels(kBatch, 0);
    for (int rep = 0; rep < 100; ++rep) {  // 0.9^200: the initial statistics are gone
      for (std::size_t s = 0; s + kBatch <= data.size(); s += kBatch) {
        std::vector<const corpus::FeatureBundle*> batch;
        for (std::size_t j = s; j < s + kBatch; ++j) batch.push_back(&data[j]);
        m.accumulate_gradients(batch, labels, w);
      }
    }
    nn::zero_grads(m.params());
    const auto adapted = adapt_bn(m, data);
    const auto rel = [](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
      return ((a - b).array().abs() / b.array().abs().max(1e-3)).maxCoeff();
    };
    CHECK(rel(m.batch_norm().running_var(), adapted.batch_norm().running_var()) < 0.05);
    const double scale = adapted.batch_norm().running_var().array().sqrt().maxCoeff();
    CHECK((m.batch_norm().running_mean() - adapted.batch_norm().running_mean()).cwiseAbs().maxCoeff() < 0.05 * scale);
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    TempDir dir("ckpt");
    std::mt19937_64 rng(7);
    model::ClassifierConfig cfg = testing::micro_classifier_config(9);
    StyleClassifier m(cfg);
    m.batch_norm().running_mean().setRandom();
    m.save(dir / "c.ckpt");
    auto back = StyleClassifier::load(dir / "c.ckpt");
    CHECK(nn::checksum(back.params()) == nn::checksum(m.params()));
    CHECK(back.batch_norm().running_mean() == m.batch_norm().running_mean());
    CHECK(back.config().audio_hidden == 3);
    const auto f = testing::random_bundle(rng, cfg, 4, 2);
    CHECK(back.embed(f) == m.embed(f));
    CHECK_THROWS_AS(nn::Checkpoint::load(dir / "c.ckpt", "acoustic_model"), Error);
  }

  TEST_CASE("overfit a small synthetic corpus, label it and stay deterministic") {
    auto data = testing::make_classifier_data(10, 1.0, 11);
    REQUIRE(data.train.size() == 60);
    TrainConfig tc;
    tc.max_epochs = 80;
    tc.seed = 1;
    model::ClassifierConfig mc;
    mc.audio_hidden = 32;
    mc.text_hidden = 32;
    mc.audio_dense = 32;
    const auto r = train(StyleClassifier(mc), data.train, data.train, tc);
    const auto m = evaluate(r.model, data.train, r.weights);
    CHECK(m.unweighted_acc == 1.0);
    for (const auto& e : data.train) CHECK(style_index(r.model.embed(e.features).argmax()) == e.label);

    // Train loss trends down: median of the last 10 epochs below that of the first 10.
    auto median10 = [&](std::size_t from) {
      std::vector<double> v;
      for (std::size_t i = from; i < from + 10 && i < r.history.size(); ++i) v.push_back(r.history[i].train_loss);
      std::sort(v.begin(), v.end());
      return v[v.size() / 2];
    };
    CHECK(median10(r.history.size() - 10) < median10(0));

    const auto again = train(StyleClassifier(mc), data.train, data.train, tc);
    REQUIRE(again.history.size() == r.history.size());
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      CHECK(again.history[i].train_loss == r.history[i].train_loss);
      CHECK(again.history[i].dev_weighted_acc == r.history[i].dev_weighted_acc);
    }

    const auto labels = label_corpus(r.model, data.corpus, *data.provider, data.stats);
    CHECK(labels.records.size() == data.corpus.size());
    CHECK(labels.errors.empty());
    int agree = 0;
    for (std::size_t i = 0; i < labels.records.size(); ++i) {
      CHECK(on_simplex(labels.records[i].embedding));
      agree += labels.records[i].argmax_label == *data.corpus.utterances[i].style_label;
    }
    CHECK(agree >= 0.9 * static_cast<double>(labels.records.size()));

    TempDir dir("emb");
    write_embeddings(dir / "e.jsonl", labels.records);
    const auto back = read_embeddings(dir / "e.jsonl");
    REQUIRE(back.size() == labels.records.size());
    CHECK(back[3].embedding == labels.records[3].embedding);
    CHECK(back[3].id == labels.records[3].id);
  }

  TEST_CASE("unreadable audio is skipped and reported") {
    auto data = testing::make_classifier_data(1, 1.0, 12);
    corpus::Utterance bad;
    bad.id = "missing";
    bad.audio_ref = "/nonexistent/none.wav";
    bad.text = "hello";
    data.corpus.utterances.push_back(bad);
    StyleClassifier m;
    const auto r = label_corpus(m, data.corpus, *data.provider, data.stats);
    CHECK(r.records.size() == 6);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].id == "missing");
  }

  TEST_CASE("empty training set is an error") {
    CHECK_THROWS_AS(train(StyleClassifier(), {}, {}, TrainConfig{}), Error);
  }
}
