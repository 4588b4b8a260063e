#include "styletts/pitch.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "styletts/error.hpp"

namespace styletts::tts {

std::vector<PitchFrame> track_pitch(const Waveform& audio, const PitchConfig& cfg) {
  if (audio.empty()) throw Error("estimate_f0: empty audio");
  if (audio.rate <= 0) throw Error("estimate_f0: invalid sample rate");
  const int rate = audio.rate;
  const int hop = cfg.framing.hop_samples(rate);
  const int win = cfg.framing.window_samples(rate);
  const int n_frames = std::max(1, cfg.framing.num_frames(audio.size(), rate));
  const int min_lag = std::max(2, static_cast<int>(std::floor(rate / cfg.max_hz)));
  const int max_lag = static_cast<int>(std::ceil(rate / cfg.min_hz));
  const int corr = static_cast<int>(std::lround(cfg.corr_ms * 1e-3 * rate));
  const auto n = static_cast<long>(audio.size());
  const auto& x = audio.samples;

  auto sample = [&](long i) { return (i >= 0 && i < n) ? x[static_cast<std::size_t>(i)] : 0.0; };

  std::vector<PitchFrame> frames(static_cast<std::size_t>(n_frames));
  std::vector<double> seg(static_cast<std::size_t>(corr + max_lag + 1));
  std::vector<double> nccf(static_cast<std::size_t>(max_lag + 2), 0.0);
  double loudest = 0.0;
  for (int t = 0; t < n_frames; ++t) {
    double rms = 0.0;
    for (int i = 0; i < win; ++i) {
      const double v = sample(static_cast<long>(t) * hop + i);
      rms += v * v;
    }
    rms = std::sqrt(rms / std::max(1, win));
    frames[static_cast<std::size_t>(t)].rms = rms;
    loudest = std::max(loudest, rms);
  }

  for (int t = 0; t < n_frames; ++t) {
    const double rms = frames[static_cast<std::size_t>(t)].rms;
    // Silent frames end up unvoiced anyway.
    if (rms < cfg.silence_rms || rms < cfg.relative_silence * loudest) continue;
    const long center = static_cast<long>(t) * hop + win / 2;
    const long start = center - (corr + max_lag) / 2;
    for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = sample(start + static_cast<long>(i));
    const Eigen::Map<const Eigen::VectorXd> head(seg.data(), corr);

    double e0 = 0.0;
    for (int i = 0; i < corr; ++i) e0 += seg[static_cast<std::size_t>(i)] * seg[static_cast<std::size_t>(i)];
    if (e0 <= 1e-20) continue;
    // Running energy of the lagged window.
    double el = 0.0;
    for (int i = 0; i < corr; ++i) {
      const double v = seg[static_cast<std::size_t>(i + min_lag)];
      el += v * v;
    }
    double best = -1.0;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      if (lag > min_lag) {
        const double out = seg[static_cast<std::size_t>(lag - 1)];
        const double in = seg[static_cast<std::size_t>(lag + corr - 1)];
        el += in * in - out * out;
      }
      const double dot = head.dot(Eigen::Map<const Eigen::VectorXd>(seg.data() + lag, corr));
      const double r = el > 1e-20 ? dot / std::sqrt(e0 * el) : 0.0;
      nccf[static_cast<std::size_t>(lag)] = r;
      best = std::max(best, r);
    }
    if (best < cfg.voicing_threshold) {
      frames[static_cast<std::size_t>(t)].nccf = std::max(0.0, best);
      continue;
    }
    // Smallest-lag local peak close to the global maximum avoids picking a
    // multiple of the true period.
    int chosen = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      const double r = nccf[static_cast<std::size_t>(lag)];
      if (r < 0.9 * best) continue;
      const double prev = lag > min_lag ? nccf[static_cast<std::size_t>(lag - 1)] : -1.0;
      const double next = lag < max_lag ? nccf[static_cast<std::size_t>(lag + 1)] : -1.0;
      if (r >= prev && r >= next) {
        chosen = lag;
        break;
      }
    }
    if (chosen < 0) continue;
    double refined = chosen;
    if (chosen > min_lag && chosen < max_lag) {
      const double a = nccf[static_cast<std::size_t>(chosen - 1)];
      const double b = nccf[static_cast<std::size_t>(chosen)];
      const double c = nccf[static_cast<std::size_t>(chosen + 1)];
      const double denom = a - 2.0 * b + c;
      if (std::abs(denom) > 1e-12) refined += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    auto& f = frames[static_cast<std::size_t>(t)];
    f.nccf = nccf[static_cast<std::size_t>(chosen)];
    f.f0 = rate / refined;
  }

  for (auto& f : frames) {
    if (f.f0 <= 0.0) continue;
    if (f.rms < cfg.silence_rms || f.rms < cfg.relative_silence * loudest ||
        f.f0 < cfg.min_hz || f.f0 > cfg.max_hz) {
      f.f0 = 0.0;
    }
  }
  return frames;
}

std::vector<double> estimate_f0(const Waveform& audio, const PitchConfig& cfg) {
  const auto frames = track_pitch(audio, cfg);
  std::vector<double> f0(frames.size());
  std::transform(frames.begin(), frames.end(), f0.begin(), [](const PitchFrame& f) { return f.f0; });
  return f0;
}

double mean_voiced_f0(const std::vector<double>& f0) {
  double sum = 0.0;
  int count = 0;
  for (double v : f0) {
    if (v > 0.0) {
      sum += v;
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

double voiced_ratio(const std::vector<double>& f0) {
  if (f0.empty()) return 0.0;
  const auto voiced = std::count_if(f0.begin(), f0.end(), [](double v) { return v > 0.0; });
  return static_cast<double>(voiced) / static_cast<double>(f0.size());
}

}  // namespace styletts::tts
