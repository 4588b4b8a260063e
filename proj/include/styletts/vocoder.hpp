#ifndef STYLETTS_VOCODER_HPP_
#define STYLETTS_VOCODER_HPP_

#include <cstdint>
#include <vector>

#include "styletts/acoustic_model.hpp"
#include "styletts/audio.hpp"
#include "styletts/dsp.hpp"

namespace styletts::tts {

struct DspVocoderConfig {
  int sample_rate = kDefaultSampleRate;
  dsp::Framing framing;
  int num_filters = 40;
  double preemphasis = 0.97;
  std::uint64_t noise_seed = 0;
};

// Source-filter synthesis: pulse train (voiced) or white noise (unvoiced)
// shaped per frame by the envelope implied by the 13 cepstra, overlap-added
// at the hop. Output has frames * hop samples.
Waveform vocode_dsp(const AcousticFrames& frames, const std::vector<double>& f0, const DspVocoderConfig& cfg = {});

// Linear-magnitude envelope on the n_fft/2+1 bins of one frame of cepstra.
std::vector<double> cepstra_to_envelope(const Eigen::RowVectorXd& cepstra, const dsp::MelFilterbank& fb,
                                        double window_energy);

inline constexpr int kMuLawLevels = 256;
inline constexpr double kMuLawMu = 255.0;

// 8-bit mu-law companding; encode clamps its input to [-1, 1].
int mulaw_encode(double x);
double mulaw_decode(int q);

}  // namespace styletts::tts

#endif  // STYLETTS_VOCODER_HPP_
