#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "styletts/corpus.hpp"
#include "styletts/embedding.hpp"
#include "styletts/error.hpp"
#include "styletts/features.hpp"
#include "styletts/pitch.hpp"
#include "styletts/synthetic.hpp"
#include "support.hpp"

using namespace styletts;
using namespace styletts::corpus;
using styletts::testing::TempDir;

namespace {

std::string manifest_line(const std::string& id, const std::string& style, const std::string& split) {
  return R"({"id":")" + id + R"(","audio":")" + id + R"(.wav","text":"the cat sat","speaker":"spk0","corpus":"tts","split":")" +
         split + R"(","style":")" + style + "\"}\n";
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("three line manifest gives three utterances") {
    const std::string m = manifest_line("a", "happy", "train") + manifest_line("b", "sad", "dev") +
                          manifest_line("c", "neutral", "test");
    const auto c = parse_manifest(m, CorpusKind::kTts);
    REQUIRE(c.size() == 3);
    CHECK(c.utterances[0].id == "a");
    CHECK(c.utterances[1].style_label == StyleLabel::kSad);
    CHECK(c.utterances[2].split == Split::kTest);
  }

  TEST_CASE("missing text names the line") {
    std::string m = manifest_line("a", "happy", "train");
    m += R"({"id":"b","audio":"b.wav","speaker":"spk0","corpus":"tts","split":"train"})" "\n";
    try {
      parse_manifest(m, CorpusKind::kTts);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("text") != std::string::npos);
    }
  }

  TEST_CASE("count table reproduces manifest counts") {
    // TTS train row of the data table, trimmed by a factor of 5 to keep the manifest small.
    const std::array<int, kNumStyles> counts = {229, 363, 896, 177, 28, 7};
    std::string m;
    int k = 0;
    for (int s = 0; s < kNumStyles; ++s)
      for (int i = 0; i < counts[s]; ++i)
        m += manifest_line("u" + std::to_string(k++), std::string(style_name(style_from_index(s))), "train");
    const auto table = count_labels(parse_manifest(m, CorpusKind::kTts));
    CHECK(table.at(Split::kTrain) == counts);
  }

  TEST_CASE("count table at full scale") {
    const std::array<int, kNumStyles> counts = {1145, 1814, 4481, 885, 140, 35};
    Corpus c;
    for (int s = 0; s < kNumStyles; ++s)
      for (int i = 0; i < counts[s]; ++i) {
        Utterance u;
        u.id = std::to_string(s) + "_" + std::to_string(i);
        u.style_label = style_from_index(s);
        c.utterances.push_back(u);
      }
    const auto table = count_labels(c);
    CHECK(table.at(Split::kTrain)[style_index(StyleLabel::kNeutral)] == 4481);
    CHECK(table.at(Split::kTrain) == counts);
  }

  TEST_CASE("external label merge") {
    CHECK(map_label("excited", CorpusKind::kExternal) == StyleLabel::kHappy);
    CHECK(map_label("neutral", CorpusKind::kExternal) == StyleLabel::kNeutral);
    CHECK_FALSE(map_label("surprise", CorpusKind::kExternal).has_value());
    for (const char* raw : {"rushed", "soft", "frustrated", "", "HAPPY", "fear", "xyz"}) {
      const auto l = map_label(raw, CorpusKind::kExternal);
      if (l) {
        CHECK((*l == StyleLabel::kNeutral || *l == StyleLabel::kHappy || *l == StyleLabel::kSad ||
               *l == StyleLabel::kAngry));
      }
    }
  }

  TEST_CASE("manifest round trip through a file") {
    TempDir dir("manifest");
    const auto c = parse_manifest(manifest_line("a", "soft", "train") + manifest_line("b", "angry", "dev"),
                                  CorpusKind::kTts, dir.path());
    write_manifest(dir / "m.jsonl", c);
    const auto back = load_manifest(dir / "m.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back.utterances[1].style_label == StyleLabel::kAngry);
    CHECK(back.utterances[1].audio_ref == c.utterances[1].audio_ref);
  }
}

TEST_SUITE("features") {
  TEST_CASE("frame count for one second") {
    const auto m = extract_mfcc(testing::tone(200, 1.0));
    CHECK(m.rows() >= 96);
    CHECK(m.rows() <= 101);
    CHECK(m.cols() == 39);
    // floor((24000 - 600) / 240) + 1
    CHECK(m.rows() == (24000 - 600) / 240 + 1);
  }

  TEST_CASE("digital silence stays finite at the floor") {
    Waveform w;
    w.samples.assign(12000, 0.0);
    const auto m = extract_mfcc(w);
    CHECK(m.allFinite());
    const auto c = extract_cepstra(w);
    // c0 of a flat log spectrum at the floor: sqrt(1/40) * 40 * log(floor).
    const double expected = std::sqrt(1.0 / 40.0) * 40.0 * std::log(1e-10);
    CHECK(c(0, 0) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(c.rightCols(12).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("prosody of a 220 Hz tone") {
    const auto p = extract_prosody(testing::tone(220, 1.0));
    REQUIRE(p.size() == kProsodyDim);
    CHECK(p.allFinite());
    CHECK(p[kF0Mean] == doctest::Approx(220).epsilon(2.0 / 220));
    CHECK(p[kF0Std] < 2.0);
    CHECK(p[kVoicedRatio] > 0.95);
  }

  TEST_CASE("prosody of white noise") {
    const auto p = extract_prosody(testing::white_noise(1.0, 3));
    REQUIRE(p.size() == kProsodyDim);
    CHECK(p.allFinite());
    CHECK(p[kVoicedRatio] < 0.1);
  }

  TEST_CASE("token embeddings") {
    HashEmbeddingProvider prov(0);
    const auto m = embed_tokens(std::string_view("hello world"), prov);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 300);
    const auto twice = embed_tokens(std::string_view("zyxq zyxq"), prov);
    CHECK(twice.row(0) == twice.row(1));
    CHECK(twice.row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
    // Recompute the hashed vector: Box-Muller normals from mt19937_64(fnv1a64(token) ^ seed).
    std::mt19937_64 rng(fnv1a64("zyxq"));
    Eigen::VectorXd v(300);
    for (int i = 0; i < 300; i += 2) {
      const double u1 = (static_cast<double>(rng()) + 1.0) * 0x1p-64;
      const double u2 = static_cast<double>(rng()) * 0x1p-64;
      const double r = std::sqrt(-2.0 * std::log(u1));
      v[i] = r * std::cos(2.0 * M_PI * u2);
      if (i + 1 < 300) v[i + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    v.normalize();
    CHECK((twice.row(0).transpose() - v).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("feature bundle shapes") {
    HashEmbeddingProvider prov(0);
    const auto f = extract_features(testing::tone(150, 0.5), "a tone", prov);
    CHECK_NOTHROW(f.validate());
    CHECK(f.mfcc.cols() == 39);
    CHECK(f.prosody.size() == 35);
    CHECK(f.token_embeddings.cols() == 300);
  }

  TEST_CASE("z-score with population std") {
    FeatureBundle f;
    f.mfcc = Eigen::MatrixXd::Zero(3, kMfccDim);
    f.mfcc.col(0) << 1, 2, 3;
    f.prosody = Eigen::VectorXd::Zero(kProsodyDim);
    f.token_embeddings = Eigen::MatrixXd::Zero(0, kTokenEmbeddingDim);
    const auto stats = fit_normalizer({f}, "toy");
    const auto n = apply_normalizer(f, stats);
    CHECK(n.mfcc(0, 0) == doctest::Approx(-1.224744871).epsilon(1e-8));
    CHECK(n.mfcc(1, 0) == doctest::Approx(0.0));
    CHECK(n.mfcc(2, 0) == doctest::Approx(1.224744871).epsilon(1e-8));
    // Constant columns map to zero.
    CHECK(n.mfcc.col(1).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("normalization is idempotent") {
    HashEmbeddingProvider prov(0);
    std::vector<FeatureBundle> fs;
    for (int i = 0; i < 4; ++i) fs.push_back(extract_features(testing::tone(120 + 40 * i, 0.4), "x", prov));
    const auto stats = fit_normalizer(fs, "a");
    std::vector<FeatureBundle> normed;
    for (const auto& f : fs) normed.push_back(apply_normalizer(f, stats));
    const auto again_stats = fit_normalizer(normed, "b");
    for (const auto& f : normed) {
      const auto g = apply_normalizer(f, again_stats);
      CHECK((g.mfcc - f.mfcc).cwiseAbs().maxCoeff() < 1e-6);
      // Dimensions whose spread sits under the floor are scaled by the floor,
      // so a second pass rescales them; only the rest must be fixed.
      for (int d = 0; d < kProsodyDim; ++d)
        if (stats.prosody_std[d] > stats.epsilon) CHECK(std::abs(g.prosody[d] - f.prosody[d]) < 1e-6);
    }
  }

  TEST_CASE("norm modes and stats json") {
    HashEmbeddingProvider prov(0);
    std::vector<FeatureBundle> fs;
    for (int i = 0; i < 3; ++i) fs.push_back(extract_features(testing::tone(100 + 50 * i, 0.3), "x", prov));
    const auto stats = fit_normalizer(fs, "c");
    const auto none = apply_normalizer(fs[0], stats, NormMode::kNone);
    CHECK(none.mfcc == fs[0].mfcc);
    const auto mf = apply_normalizer(fs[0], stats, NormMode::kMfcc);
    CHECK(mf.prosody == fs[0].prosody);
    CHECK(mf.mfcc != fs[0].mfcc);
    const auto back = NormStats::from_json(stats.to_json());
    CHECK(back.mfcc_mean == stats.mfcc_mean);
    CHECK(back.prosody_std == stats.prosody_std);
    CHECK(back.corpus_id == "c");
    CHECK_THROWS_AS(parse_norm_mode("sideways"), Error);
  }
}

TEST_SUITE("pitch") {
  TEST_CASE("220 Hz tone") {
    const auto f0 = tts::estimate_f0(testing::tone(220, 1.0));
    std::vector<double> voiced;
    for (double v : f0)
      if (v > 0) voiced.push_back(v);
    REQUIRE(!voiced.empty());
    std::nth_element(voiced.begin(), voiced.begin() + voiced.size() / 2, voiced.end());
    CHECK(std::abs(voiced[voiced.size() / 2] - 220.0) <= 2.0);
  }

  TEST_CASE("white noise is mostly unvoiced") {
    const auto f0 = tts::estimate_f0(testing::white_noise(1.0, 11));
    CHECK(1.0 - tts::voiced_ratio(f0) >= 0.8);
  }

  TEST_CASE("amplitude invariance") {
    const auto a = tts::estimate_f0(testing::tone(220, 1.0, 0.5));
    const auto b = tts::estimate_f0(testing::tone(220, 1.0, 0.25));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }

  TEST_CASE("empty audio is an error") { CHECK_THROWS_AS(tts::estimate_f0(Waveform{}), Error); }
}

TEST_SUITE("synthetic") {
  TEST_CASE("counts and determinism") {
    const auto a = generate_synthetic_corpus(default_synthetic_spec(), 3, 5);
    const auto b = generate_synthetic_corpus(default_synthetic_spec(), 3, 5);
    REQUIRE(a.size() == 18);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.utterances[i].text == b.utterances[i].text);
      CHECK(a.utterances[i].audio->samples == b.utterances[i].audio->samples);
    }
    const auto t = count_labels(a).at(Split::kTrain);
    for (int c : t) CHECK(c == 3);
  }

  TEST_CASE("120 utterances with every label") {
    const auto c = generate_synthetic_corpus(default_synthetic_spec(), 20, 1);
    CHECK(c.size() == 120);
    const auto t = count_labels(c).at(Split::kTrain);
    for (int n : t) CHECK(n == 20);
  }

  TEST_CASE("per-style F0 fidelity") {
    const auto spec = default_synthetic_spec();
    CHECK(spec.at(StyleLabel::kHappy).f0_mean == 215.0);
    CHECK(spec.at(StyleLabel::kNeutral).f0_mean == 184.0);
    const auto c = generate_synthetic_corpus(spec, 10, 2);
    std::map<StyleLabel, std::vector<double>> means;
    for (const auto& u : c.utterances) means[*u.style_label].push_back(tts::mean_voiced_f0(tts::estimate_f0(*u.audio)));
    for (const auto& [s, v] : means) {
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      CAPTURE(style_name(s));
      CHECK(std::abs(m - spec.at(s).f0_mean) / spec.at(s).f0_mean < 0.05);
    }
  }

  TEST_CASE("saved corpus loads back with audio") {
    TempDir dir("syn");
    const auto c = generate_synthetic_corpus(default_synthetic_spec(), 1, 9);
    const auto manifest = save_corpus(c, dir.path());
    const auto back = load_manifest(manifest);
    REQUIRE(back.size() == c.size());
    const auto w = load_audio(back, back.utterances[0]);
    CHECK(w.size() == c.utterances[0].audio->size());
  }
}
