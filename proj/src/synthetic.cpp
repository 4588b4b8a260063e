#include "styletts/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "styletts/embedding.hpp"
#include "styletts/error.hpp"

namespace styletts::corpus {

SyntheticSpec default_synthetic_spec() {
  return {
      {StyleLabel::kRushed, {181.9, 12.8, 1.6, 0.55}},
      {StyleLabel::kSoft, {180.5, 14.7, 0.85, 0.18}},
      {StyleLabel::kNeutral, {184.0, 10.3, 1.0, 0.45}},
      {StyleLabel::kHappy, {215.0, 37.3, 1.1, 0.7}},
      {StyleLabel::kAngry, {195.5, 30.8, 1.2, 0.9}},
      {StyleLabel::kSad, {197.3, 30.8, 0.75, 0.28}},
  };
}

const std::vector<std::string>& neutral_sentences() {
  static const std::vector<std::string> kSentences = {
      "the meeting is at ten in the office",
      "the train will leave the station at nine",
      "there is a table by the window",
      "the weather report is on the radio today",
      "we will walk to the park after the meeting",
      "the book is on the table in the room",
      "the bus is on the road to the city",
      "she said the door was open",
      "the number is four two one",
      "they have a house on the street",
      "the light in the room is on",
      "it will rain in the evening",
  };
  return kSentences;
}

const std::vector<std::string>& style_keywords(StyleLabel s) {
  static const std::array<std::vector<std::string>, kNumStyles> kWords = {{
      {"hurry", "quick", "quickly", "fast", "late", "rush", "run"},
      {"quiet", "gently", "calm", "softly", "sleep", "whisper", "slowly"},
      {"report", "number", "station", "office", "table", "meeting", "weather"},
      {"great", "wonderful", "happy", "love", "fun", "amazing", "glad"},
      {"angry", "stop", "never", "hate", "wrong", "enough", "now"},
      {"sorry", "sad", "miss", "lost", "alone", "tired", "cry"},
  }};
  return kWords[static_cast<std::size_t>(style_index(s))];
}

namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> kWords = {
      "the", "day", "is", "here", "we", "will", "go", "home", "it", "was", "a", "long",
      "time", "that", "you", "can", "see", "the", "city", "water", "road", "with", "my", "friend",
  };
  return kWords;
}

struct Formants {
  double f1, f2, f3;
};

constexpr std::array<Formants, 6> kVowels = {{
    {730, 1090, 2440}, {270, 2290, 3010}, {530, 1840, 2480},
    {570, 840, 2410},  {300, 870, 2240},  {640, 1190, 2390},
}};

double formant_gain(double f, const Formants& v) {
  auto bump = [f](double center, double bw) {
    const double x = (f - center) / bw;
    return 1.0 / (1.0 + x * x);
  };
  return bump(v.f1, 90.0) + 0.7 * bump(v.f2, 120.0) + 0.4 * bump(v.f3, 160.0) + 0.03;
}

std::string make_transcript(StyleLabel style, double keyword_prob, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_dist(3, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& fillers = filler_words();
  const auto& keys = style_keywords(style);
  std::uniform_int_distribution<std::size_t> pick_filler(0, fillers.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_key(0, keys.size() - 1);
  std::vector<std::string> words;
  const int n = len_dist(rng);
  for (int i = 0; i < n; ++i) words.push_back(fillers[pick_filler(rng)]);
  if (unit(rng) < keyword_prob) {
    const int n_keys = unit(rng) < 0.5 ? 1 : 2;
    for (int k = 0; k < n_keys; ++k) {
      std::uniform_int_distribution<std::size_t> pos(0, words.size());
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos(rng)), keys[pick_key(rng)]);
    }
  }
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) text += ' ';
    text += words[i];
  }
  return text + ".";
}

}  // namespace

Waveform render_styled_speech(const std::string& text, const SyntheticStyleSpec& style, std::uint64_t seed,
                              int sample_rate) {
  if (style.f0_mean <= 0.0 || style.rate <= 0.0 || style.energy <= 0.0) {
    throw Error("synthetic style spec must have positive f0_mean, rate and energy");
  }
  auto words = tokenize(text);
  if (words.empty()) words.push_back("ah");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double fs = sample_rate;
  const double lead = 0.12;
  const double gap = 0.05 / style.rate;
  std::vector<double> dur(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const double letters = std::min<double>(10.0, static_cast<double>(words[i].size()));
    dur[i] = (0.12 + 0.035 * letters) / style.rate;
  }

  // Per-word pitch targets with duration-weighted zero mean and unit spread,
  // so the voiced-frame mean stays at f0_mean.
  std::vector<double> z(words.size());
  for (double& v : z) v = normal(rng);
  double wsum = 0.0;
  double zmean = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    zmean += dur[i] * z[i];
    wsum += dur[i];
  }
  zmean /= wsum;
  double zvar = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) zvar += dur[i] * (z[i] - zmean) * (z[i] - zmean);
  zvar /= wsum;
  for (double& v : z) v = zvar > 1e-12 ? (v - zmean) / std::sqrt(zvar) : 0.0;
  const double utt_mean = style.f0_mean * (1.0 + 0.01 * normal(rng));

  double total = 2 * lead;
  for (double d : dur) total += d + gap;
  const auto n = static_cast<std::size_t>(std::ceil(total * fs));
  Waveform w;
  w.rate = sample_rate;
  w.samples.assign(n, 0.0);

  // Louder styles are brighter and less breathy.
  const double tilt = 1.6 - 0.9 * std::clamp(style.energy, 0.0, 1.0);
  const double breath = 0.02 + 0.12 * (1.0 - std::clamp(style.energy, 0.0, 1.0));
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  double t0 = lead;
  double phase = 0.0;
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    const Formants& vowel = kVowels[fnv1a64(words[wi]) % kVowels.size()];
    const double target = std::clamp(utt_mean + style.f0_std * std::clamp(z[wi], -2.5, 2.5), 60.0, 450.0);
    const double glide = 0.15 * style.f0_std;
    const auto begin = static_cast<std::size_t>(t0 * fs);
    const auto len = static_cast<std::size_t>(dur[wi] * fs);
    const double ramp = 0.012 * fs;
    for (std::size_t k = 0; k < len && begin + k < n; ++k) {
      const double pos = static_cast<double>(k) / static_cast<double>(len);
      const double f0 = target + glide * (1.0 - 2.0 * pos);
      phase += 2.0 * std::numbers::pi * f0 / fs;
      if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
      double s = 0.0;
      const int harmonics = std::max(1, static_cast<int>(4000.0 / f0));
      for (int h = 1; h <= harmonics; ++h) {
        const double fh = h * f0;
        s += formant_gain(fh, vowel) * std::pow(fh / 100.0, -tilt) * std::sin(h * phase);
      }
      const double kd = static_cast<double>(k);
      const double env = std::min({1.0, kd / ramp, static_cast<double>(len - k) / ramp});
      w.samples[begin + k] += env * (s + breath * uni(rng));
    }
    t0 += dur[wi] + gap;
  }

  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  const double scale = peak > 0.0 ? style.energy * 0.95 / peak : 0.0;
  for (double& s : w.samples) s = s * scale + 1e-5 * uni(rng);
  w.clamp();
  return w;
}

Corpus generate_synthetic_corpus(const SyntheticSpec& spec, int n_per_class, std::uint64_t seed,
                                 const SyntheticOptions& options) {
  if (n_per_class <= 0) throw Error("generate_synthetic_corpus: n per class must be positive");
  if (spec.empty()) throw Error("generate_synthetic_corpus: empty style spec");
  Corpus c;
  std::mt19937_64 rng(seed);
  const int n_train = static_cast<int>(std::lround(n_per_class * options.train_fraction));
  const int n_dev = static_cast<int>(std::lround(n_per_class * options.dev_fraction));
  for (const auto& [style, s] : spec) {
    for (int k = 0; k < n_per_class; ++k) {
      Utterance u;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s_%s_%04d", options.corpus_id.c_str(),
                    std::string(style_name(style)).c_str(), k);
      u.id = buf;
      u.audio_ref = u.id + ".wav";
      u.text = make_transcript(style, options.keyword_prob, rng);
      u.speaker_id = options.speaker_id;
      u.style_label = style;
      u.corpus_id = options.corpus_id;
      u.split = k < n_train ? Split::kTrain : (k < n_train + n_dev ? Split::kDev : Split::kTest);
      u.audio = render_styled_speech(u.text, s, rng(), options.sample_rate);
      c.utterances.push_back(std::move(u));
    }
  }
  return c;
}

std::filesystem::path save_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& u : c.utterances) {
    if (u.audio) write_wav(dir / u.audio_ref, *u.audio);
  }
  const auto manifest = dir / "manifest.jsonl";
  write_manifest(manifest, c);
  return manifest;
}

}  // namespace styletts::corpus
