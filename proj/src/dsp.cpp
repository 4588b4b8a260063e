#include "styletts/dsp.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "styletts/error.hpp"

namespace styletts::dsp {

int Framing::window_samples(int rate) const {
  return static_cast<int>(std::lround(window_ms * 1e-3 * rate));
}

int Framing::hop_samples(int rate) const {
  return static_cast<int>(std::lround(hop_ms * 1e-3 * rate));
}

int Framing::num_frames(std::size_t num_samples, int rate) const {
  const auto win = static_cast<std::size_t>(window_samples(rate));
  const auto hop = static_cast<std::size_t>(hop_samples(rate));
  if (num_samples < win || hop == 0) return 0;
  return static_cast<int>((num_samples - win) / hop + 1);
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> hamming(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  }
  return w;
}

std::vector<double> hann(int n) {
  // Periodic form so that 50%-overlapped windows sum to one.
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

std::vector<std::complex<double>> rfft(std::span<const double> frame, int n_fft) {
  std::vector<double> buf(static_cast<std::size_t>(n_fft), 0.0);
  for (std::size_t i = 0; i < frame.size() && i < buf.size(); ++i) buf[i] = frame[i];
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> out;
  fft.fwd(out, buf);
  out.resize(static_cast<std::size_t>(n_fft / 2 + 1));
  return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> half_spectrum, int n_fft) {
  if (half_spectrum.size() != static_cast<std::size_t>(n_fft / 2 + 1)) {
    throw ShapeError("irfft: spectrum length does not match n_fft");
  }
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> in(half_spectrum.begin(), half_spectrum.end());
  std::vector<double> out;
  fft.inv(out, in, n_fft);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank MelFilterbank::make(int num_filters, int n_fft, int rate, double low_hz, double high_hz) {
  MelFilterbank fb;
  fb.n_fft = n_fft;
  fb.rate = rate;
  const int bins = n_fft / 2 + 1;
  fb.weights = Eigen::MatrixXd::Zero(num_filters, bins);
  const double lo = hz_to_mel(low_hz);
  const double hi = hz_to_mel(high_hz);
  std::vector<double> edges(static_cast<std::size_t>(num_filters + 2));
  for (int i = 0; i < num_filters + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (num_filters + 1));
  }
  const double bin_hz = static_cast<double>(rate) / n_fft;
  for (int m = 0; m < num_filters; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m + 1)];
    const double right = edges[static_cast<std::size_t>(m + 2)];
    fb.center_hz.push_back(center);
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb.weights(m, k) = w;
    }
  }
  return fb;
}

Eigen::MatrixXd dct_matrix(int num_out, int num_in) {
  Eigen::MatrixXd d(num_out, num_in);
  for (int k = 0; k < num_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / num_in) : std::sqrt(2.0 / num_in);
    for (int n = 0; n < num_in; ++n) {
      d(k, n) = scale * std::cos(std::numbers::pi * k * (n + 0.5) / num_in);
    }
  }
  return d;
}

}  // namespace styletts::dsp
