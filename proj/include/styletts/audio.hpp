#ifndef STYLETTS_AUDIO_HPP_
#define STYLETTS_AUDIO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace styletts {

inline constexpr int kDefaultSampleRate = 24000;

// Mono PCM audio. Samples are kept in [-1, 1]; clamp() enforces it.
struct Waveform {
  std::vector<double> samples;
  int rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const { return rate > 0 ? static_cast<double>(samples.size()) / rate : 0.0; }
  void clamp();
};

// 16-bit PCM mono WAV. Multi-channel input is rejected.
Waveform read_wav(const std::filesystem::path& path);
// Reads and resamples to target_rate when the file rate differs.
Waveform read_wav(const std::filesystem::path& path, int target_rate);
void write_wav(const std::filesystem::path& path, const Waveform& wave);
std::vector<std::uint8_t> encode_wav(const Waveform& wave);
Waveform decode_wav(const std::vector<std::uint8_t>& bytes);

// Band-limited (windowed-sinc) resampling.
Waveform resample(const Waveform& in, int target_rate);

}  // namespace styletts

#endif  // STYLETTS_AUDIO_HPP_
