#include "styletts/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "styletts/error.hpp"

namespace styletts::tts {

std::vector<double> cepstra_to_envelope(const Eigen::RowVectorXd& cepstra, const dsp::MelFilterbank& fb,
                                        double window_energy) {
  const auto m = static_cast<int>(fb.weights.rows());
  // Orthonormal DCT: the inverse is the transpose, missing orders are zero.
  const Eigen::MatrixXd dct = dsp::dct_matrix(static_cast<int>(cepstra.size()), m);
  const Eigen::VectorXd log_mel = dct.transpose() * cepstra.transpose();
  const Eigen::VectorXd band = fb.weights.rowwise().sum();
  // Per-bin power a flat spectrum would need to produce each band energy.
  std::vector<double> log_power(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double w = std::max(band(i), 1e-6) * window_energy;
    log_power[static_cast<std::size_t>(i)] = log_mel(i) - std::log(w);
  }
  const int bins = fb.n_fft / 2 + 1;
  const double bin_hz = static_cast<double>(fb.rate) / fb.n_fft;
  std::vector<double> mag(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    const double f = k * bin_hz;
    double lp;
    if (f <= fb.center_hz.front()) {
      lp = log_power.front();
    } else if (f >= fb.center_hz.back()) {
      lp = log_power.back();
    } else {
      const auto it = std::upper_bound(fb.center_hz.begin(), fb.center_hz.end(), f);
      const auto hi = static_cast<std::size_t>(it - fb.center_hz.begin());
      const double f0 = fb.center_hz[hi - 1];
      const double f1 = fb.center_hz[hi];
      const double a = (f - f0) / (f1 - f0);
      lp = (1.0 - a) * log_power[hi - 1] + a * log_power[hi];
    }
    mag[static_cast<std::size_t>(k)] = std::exp(0.5 * std::clamp(lp, -60.0, 60.0));
  }
  return mag;
}

Waveform vocode_dsp(const AcousticFrames& frames, const std::vector<double>& f0, const DspVocoderConfig& cfg) {
  frames.validate();
  const int n_frames = frames.frames();
  if (static_cast<std::size_t>(n_frames) != f0.size()) {
    throw ShapeError("vocode_dsp: " + std::to_string(n_frames) + " acoustic frames but " +
                     std::to_string(f0.size()) + " f0 values");
  }
  const int rate = cfg.sample_rate;
  const int hop = cfg.framing.hop_samples(rate);
  const int win = cfg.framing.window_samples(rate);
  const int analysis_fft = dsp::next_pow2(win);
  const auto fb = dsp::MelFilterbank::make(cfg.num_filters, analysis_fft, rate, 0.0, rate / 2.0);
  double window_energy = 0.0;
  for (double w : dsp::hamming(win)) window_energy += w * w;

  const int seg = 2 * hop;
  const int n_fft = dsp::next_pow2(seg) * 2;
  const auto taper = dsp::hann(seg);
  const std::size_t total = static_cast<std::size_t>(n_frames) * static_cast<std::size_t>(hop);

  // Excitation with unit power per sample.
  std::vector<double> excitation(total + static_cast<std::size_t>(win + seg), 0.0);
  std::mt19937_64 rng(cfg.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  double phase = 0.0;
  for (std::size_t n = 0; n < excitation.size(); ++n) {
    // Sample n sits under the analysis window of frame (n - win/2) / hop.
    const long t = std::clamp<long>((static_cast<long>(n) - win / 2 + hop / 2) / hop, 0, n_frames - 1);
    const double hz = f0[static_cast<std::size_t>(t)];
    if (hz > 0.0) {
      phase += hz / rate;
      if (phase >= 1.0) {
        phase -= std::floor(phase);
        excitation[n] = std::sqrt(rate / hz);
      }
    } else {
      excitation[n] = noise(rng);
    }
  }

  std::vector<double> out(excitation.size(), 0.0);
  std::vector<double> buf(static_cast<std::size_t>(seg));
  const double analysis_bin = static_cast<double>(rate) / analysis_fft;
  const double synth_bin = static_cast<double>(rate) / n_fft;
  for (int t = 0; t < n_frames; ++t) {
    const long start = static_cast<long>(t) * hop + win / 2 - hop;
    for (int i = 0; i < seg; ++i) {
      const long idx = start + i;
      buf[static_cast<std::size_t>(i)] =
          idx >= 0 ? excitation[static_cast<std::size_t>(idx)] * taper[static_cast<std::size_t>(i)] : 0.0;
    }
    const auto env = cepstra_to_envelope(frames.mfcc.row(t), fb, window_energy);
    auto spec = dsp::rfft(buf, n_fft);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double pos = k * synth_bin / analysis_bin;
      const auto lo = std::min(static_cast<std::size_t>(pos), env.size() - 1);
      const auto hi = std::min(lo + 1, env.size() - 1);
      const double a = pos - static_cast<double>(lo);
      spec[k] *= (1.0 - a) * env[lo] + a * env[hi];
    }
    const auto y = dsp::irfft(spec, n_fft);
    // Zero-phase filtering: the tail of the circular output is negative time.
    const int wrap = seg + (n_fft - seg) / 2;
    for (int i = 0; i < n_fft; ++i) {
      const long idx = start + (i < wrap ? i : i - n_fft);
      if (idx >= 0 && static_cast<std::size_t>(idx) < out.size()) out[static_cast<std::size_t>(idx)] += y[static_cast<std::size_t>(i)];
    }
  }

  Waveform wave;
  wave.rate = rate;
  wave.samples.resize(total);
  double prev = 0.0;
  for (std::size_t n = 0; n < total; ++n) {
    prev = out[n] + cfg.preemphasis * prev;
    wave.samples[n] = prev;
  }
  wave.clamp();
  return wave;
}

int mulaw_encode(double x) {
  x = std::clamp(x, -1.0, 1.0);
  const double y = std::copysign(std::log1p(kMuLawMu * std::abs(x)) / std::log1p(kMuLawMu), x);
  return std::clamp(static_cast<int>(std::lround((y + 1.0) * 0.5 * (kMuLawLevels - 1))), 0, kMuLawLevels - 1);
}

double mulaw_decode(int q) {
  if (q < 0 || q >= kMuLawLevels) throw Error("mu-law code out of range");
  const double y = 2.0 * q / (kMuLawLevels - 1) - 1.0;
  return std::copysign((std::pow(1.0 + kMuLawMu, std::abs(y)) - 1.0) / kMuLawMu, y);
}

}  // namespace styletts::tts
