#ifndef STYLETTS_DSP_HPP_
#define STYLETTS_DSP_HPP_

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace styletts::dsp {

// Analysis framing shared by MFCC, prosody and F0 extraction.
struct Framing {
  double window_ms = 25.0;
  double hop_ms = 10.0;

  int window_samples(int rate) const;
  int hop_samples(int rate) const;
  // floor((N - window) / hop) + 1, or 0 when N < window.
  int num_frames(std::size_t num_samples, int rate) const;
};

int next_pow2(int n);

std::vector<double> hamming(int n);
std::vector<double> hann(int n);

// Real FFT of a zero-padded frame; returns bins 0..n/2.
std::vector<std::complex<double>> rfft(std::span<const double> frame, int n_fft);
// Inverse of rfft for a length-n_fft real signal.
std::vector<double> irfft(std::span<const std::complex<double>> half_spectrum, int n_fft);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-style filters, rows = filters, cols = n_fft/2+1 bins.
struct MelFilterbank {
  Eigen::MatrixXd weights;
  std::vector<double> center_hz;
  int n_fft = 0;
  int rate = 0;

  static MelFilterbank make(int num_filters, int n_fft, int rate, double low_hz, double high_hz);
};

// Orthonormal DCT-II matrix (rows = output coefficients).
Eigen::MatrixXd dct_matrix(int num_out, int num_in);

}  // namespace styletts::dsp

#endif  // STYLETTS_DSP_HPP_
