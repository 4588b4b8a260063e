#include "styletts/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "styletts/error.hpp"

namespace styletts {

void Waveform::clamp() {
  for (double& s : samples) {
    if (!std::isfinite(s)) s = 0.0;
    s = std::clamp(s, -1.0, 1.0);
  }
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

std::vector<std::uint8_t> encode_wav(const Waveform& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wave.rate));
  put_u32(out, static_cast<std::uint32_t>(wave.rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);
  for (double s : wave.samples) {
    const double c = std::clamp(std::isfinite(s) ? s : 0.0, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

Waveform decode_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  int channels = 0;
  int bits = 0;
  int rate = 0;
  int format = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t len = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Tolerate a truncated data chunk; anything else is malformed.
      if (std::memcmp(chunk, "data", 4) != 0) throw ParseError("truncated WAV chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw ParseError("short fmt chunk");
      format = get_u16(chunk + 8);
      channels = get_u16(chunk + 10);
      rate = static_cast<int>(get_u32(chunk + 12));
      bits = get_u16(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = std::min<std::size_t>(len, bytes.size() - body);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (format != 1 || bits != 16) throw ParseError("only 16-bit PCM WAV is supported");
  if (channels != 1) throw ParseError("only mono WAV is supported");
  if (data == nullptr) throw ParseError("WAV has no data chunk");
  Waveform w;
  w.rate = rate;
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto v = static_cast<std::int16_t>(get_u16(data + 2 * i));
    w.samples[i] = v / 32768.0;
  }
  return w;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open audio file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Waveform read_wav(const std::filesystem::path& path, int target_rate) {
  Waveform w = read_wav(path);
  if (target_rate > 0 && w.rate != target_rate) return resample(w, target_rate);
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto bytes = encode_wav(wave);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write audio file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Waveform resample(const Waveform& in, int target_rate) {
  if (target_rate <= 0 || in.rate <= 0) throw Error("invalid sample rate for resampling");
  if (in.rate == target_rate || in.empty()) {
    Waveform out = in;
    out.rate = target_rate;
    return out;
  }
  const double ratio = static_cast<double>(target_rate) / in.rate;
  const double cutoff = std::min(1.0, ratio);  // relative to input Nyquist
  constexpr int kHalfTaps = 16;
  const double support = kHalfTaps / cutoff;
  const auto n_out = static_cast<std::size_t>(std::floor(in.size() * ratio));
  Waveform out;
  out.rate = target_rate;
  out.samples.resize(n_out);
  const auto n_in = static_cast<long>(in.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = i / ratio;
    const long lo = static_cast<long>(std::ceil(t - support));
    const long hi = static_cast<long>(std::floor(t + support));
    double acc = 0.0;
    for (long k = std::max(0L, lo); k <= std::min(n_in - 1, hi); ++k) {
      const double x = (t - k) * cutoff;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * (t - k) / support);
      acc += in.samples[static_cast<std::size_t>(k)] * sinc * win * cutoff;
    }
    out.samples[i] = acc;
  }
  out.clamp();
  return out;
}

}  // namespace styletts
