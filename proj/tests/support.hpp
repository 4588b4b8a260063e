#ifndef STYLETTS_TESTS_SUPPORT_HPP_
#define STYLETTS_TESTS_SUPPORT_HPP_

#include <array>
#include <cmath>
#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "styletts/audio.hpp"
#include "styletts/nn/param.hpp"
#include "styletts/style.hpp"

namespace styletts::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("styletts_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Waveform tone(double hz, double seconds, double amplitude = 0.5, int rate = kDefaultSampleRate) {
  Waveform w;
  w.rate = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amplitude * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / rate);
  return w;
}

inline Waveform white_noise(double seconds, std::uint64_t seed, double amplitude = 0.3, int rate = kDefaultSampleRate) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  Waveform w;
  w.rate = rate;
  w.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (auto& s : w.samples) s = u(rng);
  return w;
}

// Oracles written from the definitions, sharing no code with the library.

// Inverse prior with the neutral prior capped.
inline std::array<double, kNumStyles> oracle_class_weights(const std::array<int, kNumStyles>& counts, double cap) {
  long total = 0;
  for (int c : counts) total += c;
  std::array<double, kNumStyles> w{};
  for (int i = 0; i < kNumStyles; ++i) {
    if (counts[i] == 0) continue;
    double prior = static_cast<double>(counts[i]) / static_cast<double>(total);
    if (i == style_index(StyleLabel::kNeutral) && prior > cap) prior = cap;
    w[i] = 1.0 / prior;
  }
  return w;
}

struct OracleAccuracy {
  double unweighted = 0.0;
  double weighted = 0.0;
};

// Expands a confusion matrix into one (truth, prediction) pair per sample and
// counts.
inline OracleAccuracy oracle_accuracy(const std::array<std::array<long, kNumStyles>, kNumStyles>& confusion,
                                      const std::array<double, kNumStyles>& w) {
  std::vector<std::pair<int, int>> samples;
  for (int t = 0; t < kNumStyles; ++t)
    for (int p = 0; p < kNumStyles; ++p)
      for (long k = 0; k < confusion[t][p]; ++k) samples.emplace_back(t, p);
  OracleAccuracy out;
  if (samples.empty()) return out;
  long correct = 0;
  std::array<long, kNumStyles> seen{};
  std::array<long, kNumStyles> hit{};
  for (const auto& [t, p] : samples) {
    ++seen[t];
    if (t == p) {
      ++correct;
      ++hit[t];
    }
  }
  out.unweighted = static_cast<double>(correct) / static_cast<double>(samples.size());
  double num = 0.0;
  double den = 0.0;
  for (int c = 0; c < kNumStyles; ++c) {
    if (seen[c] == 0) continue;
    num += w[c] * (static_cast<double>(hit[c]) / static_cast<double>(seen[c]));
    den += w[c];
  }
  out.weighted = den > 0.0 ? num / den : 0.0;
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // parameter name and entry of the worst error
  long entries = 0;
};

// Central differences on every entry of every parameter. `run` performs one
// forward/backward pass, accumulating into the grads, and returns the loss.
// Relative error is |a - n| / max(|a| + |n|, floor) so that entries whose
// true gradient is zero are judged on the absolute difference.
template <class Run>
GradCheck check_gradients(const nn::ParamList& params, Run&& run, double h = 1e-5, double floor = 1e-6) {
  nn::zero_grads(params);
  run();
  std::vector<nn::Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      const double up = run();
      p->value.data()[i] = orig - h;
      const double down = run();
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k].data()[i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      ++out.entries;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                    std::to_string(numeric);
      }
    }
  }
  nn::zero_grads(params);
  return out;
}

}  // namespace styletts::testing

#endif  // STYLETTS_TESTS_SUPPORT_HPP_
