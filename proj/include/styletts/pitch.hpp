#ifndef STYLETTS_PITCH_HPP_
#define STYLETTS_PITCH_HPP_

#include <vector>

#include "styletts/audio.hpp"
#include "styletts/dsp.hpp"

namespace styletts::tts {

struct PitchConfig {
  dsp::Framing framing;       // frame grid; matches the MFCC grid
  double min_hz = 50.0;
  double max_hz = 500.0;
  double corr_ms = 25.0;      // correlation window length
  double voicing_threshold = 0.5;
  double silence_rms = 1e-4;
  double relative_silence = 0.01;  // relative to the loudest frame
};

struct PitchFrame {
  double f0 = 0.0;    // Hz, 0 when unvoiced
  double nccf = 0.0;  // normalized cross-correlation at the chosen lag
  double rms = 0.0;
};

// Normalized cross-correlation pitch tracker. One frame per 10 ms hop on the
// same grid as extract_mfcc. Throws on empty audio.
std::vector<PitchFrame> track_pitch(const Waveform& audio, const PitchConfig& cfg = {});
std::vector<double> estimate_f0(const Waveform& audio, const PitchConfig& cfg = {});

// Mean of the nonzero entries; 0 when there are none.
double mean_voiced_f0(const std::vector<double>& f0);
double voiced_ratio(const std::vector<double>& f0);

}  // namespace styletts::tts

#endif  // STYLETTS_PITCH_HPP_
