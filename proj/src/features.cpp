#include "styletts/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "styletts/error.hpp"
#include "styletts/pitch.hpp"

namespace styletts::corpus {

namespace {

// Power spectra of windowed frames on the shared 25/10 ms grid.
Eigen::MatrixXd frame_power(const Waveform& audio, const dsp::Framing& framing, double preemph, int* n_fft_out) {
  const int rate = audio.rate;
  const int win = framing.window_samples(rate);
  const int hop = framing.hop_samples(rate);
  const int n_frames = framing.num_frames(audio.size(), rate);
  if (n_frames <= 0) {
    throw Error("audio shorter than one analysis window (" + std::to_string(audio.size()) + " samples)");
  }
  const int n_fft = dsp::next_pow2(win);
  *n_fft_out = n_fft;
  const auto window = dsp::hamming(win);
  Eigen::MatrixXd power(n_frames, n_fft / 2 + 1);
  std::vector<double> frame(static_cast<std::size_t>(win));
  for (int t = 0; t < n_frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * static_cast<std::size_t>(hop);
    for (int i = 0; i < win; ++i) {
      const std::size_t k = off + static_cast<std::size_t>(i);
      double v = audio.samples[k];
      if (preemph > 0.0) v -= preemph * (k > 0 ? audio.samples[k - 1] : 0.0);
      frame[static_cast<std::size_t>(i)] = v * window[static_cast<std::size_t>(i)];
    }
    const auto spec = dsp::rfft(frame, n_fft);
    for (std::size_t k = 0; k < spec.size(); ++k) power(t, static_cast<Eigen::Index>(k)) = std::norm(spec[k]);
  }
  return power;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least-squares slope of y against x.
double slope_of(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return 0.0;
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

Eigen::MatrixXd extract_cepstra(const Waveform& audio, const MfccConfig& cfg) {
  if (audio.empty()) throw Error("extract_mfcc: empty audio");
  int n_fft = 0;
  const Eigen::MatrixXd power = frame_power(audio, cfg.framing, cfg.preemphasis, &n_fft);
  const auto fb = dsp::MelFilterbank::make(cfg.num_filters, n_fft, audio.rate, cfg.low_hz, audio.rate / 2.0);
  Eigen::MatrixXd mel = power * fb.weights.transpose();
  mel = mel.array().max(cfg.energy_floor).log().matrix();
  const Eigen::MatrixXd dct = dsp::dct_matrix(cfg.num_cepstra, cfg.num_filters);
  return mel * dct.transpose();
}

Eigen::MatrixXd add_deltas(const Eigen::MatrixXd& statics, int window) {
  const Eigen::Index t_len = statics.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(t_len, statics.cols());
  double denom = 0.0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (int n = 1; n <= window; ++n) {
      const Eigen::Index fwd = std::min(t + n, t_len - 1);
      const Eigen::Index back = std::max<Eigen::Index>(t - n, 0);
      d.row(t) += n * (statics.row(fwd) - statics.row(back));
    }
  }
  return d / denom;
}

Eigen::MatrixXd extract_mfcc(const Waveform& audio, const MfccConfig& cfg) {
  const Eigen::MatrixXd c = extract_cepstra(audio, cfg);
  const Eigen::MatrixXd d = add_deltas(c, cfg.delta_window);
  const Eigen::MatrixXd dd = add_deltas(d, cfg.delta_window);
  Eigen::MatrixXd out(c.rows(), c.cols() * 3);
  out << c, d, dd;
  return out;
}

Eigen::VectorXd extract_prosody(const Waveform& audio, int token_count) {
  if (audio.empty()) throw Error("extract_prosody: empty audio");
  const dsp::Framing framing;
  int n_fft = 0;
  const Eigen::MatrixXd power = frame_power(audio, framing, 0.0, &n_fft);
  const int n_frames = static_cast<int>(power.rows());
  const int rate = audio.rate;
  const int win = framing.window_samples(rate);
  const int hop = framing.hop_samples(rate);
  const double hop_s = framing.hop_ms * 1e-3;
  const double bin_hz = static_cast<double>(rate) / n_fft;

  tts::PitchConfig pcfg;
  pcfg.framing = framing;
  auto pitch = tts::track_pitch(audio, pcfg);
  pitch.resize(static_cast<std::size_t>(n_frames));

  std::vector<double> times, log_e, zcr, centroid, rolloff, rms, hnr, flatness;
  std::vector<double> f0_t, f0_v;
  for (int t = 0; t < n_frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * static_cast<std::size_t>(hop);
    double energy = 0.0;
    int crossings = 0;
    for (int i = 0; i < win; ++i) {
      const double v = audio.samples[off + static_cast<std::size_t>(i)];
      energy += v * v;
      if (i > 0 && ((v >= 0.0) != (audio.samples[off + static_cast<std::size_t>(i) - 1] >= 0.0))) ++crossings;
    }
    times.push_back(t * hop_s);
    log_e.push_back(std::log(energy + 1e-10));
    zcr.push_back(static_cast<double>(crossings) / (win - 1));
    rms.push_back(std::sqrt(energy / win));

    const auto row = power.row(t);
    const double total = row.sum();
    double c = 0.0;
    double roll = 0.0;
    double flat = 0.0;
    if (total > 1e-20) {
      double acc = 0.0;
      bool found = false;
      double log_sum = 0.0;
      for (Eigen::Index k = 0; k < row.size(); ++k) {
        c += k * bin_hz * row(k);
        acc += row(k);
        if (!found && acc >= 0.85 * total) {
          roll = k * bin_hz;
          found = true;
        }
        log_sum += std::log(row(k) + 1e-20);
      }
      c /= total;
      flat = std::exp(log_sum / static_cast<double>(row.size())) / (total / static_cast<double>(row.size()));
    }
    centroid.push_back(c / 1000.0);
    rolloff.push_back(roll / 1000.0);
    flatness.push_back(flat);

    const double r = std::clamp(pitch[static_cast<std::size_t>(t)].nccf, 1e-3, 0.999);
    hnr.push_back(10.0 * std::log10(r / (1.0 - r)));
    if (pitch[static_cast<std::size_t>(t)].f0 > 0.0) {
      f0_t.push_back(t * hop_s);
      f0_v.push_back(pitch[static_cast<std::size_t>(t)].f0);
    }
  }

  Eigen::VectorXd p = Eigen::VectorXd::Zero(kProsodyDim);
  if (!f0_v.empty()) {
    const auto [mn, mx] = std::minmax_element(f0_v.begin(), f0_v.end());
    p(kF0Mean) = mean_of(f0_v);
    p(kF0Std) = std_of(f0_v);
    p(kF0Min) = *mn;
    p(kF0Max) = *mx;
    p(kF0Range) = *mx - *mn;
    p(kF0Median) = median_of(f0_v);
    p(kF0Slope) = slope_of(f0_t, f0_v);
    std::vector<double> df0;
    for (int t = 1; t < n_frames; ++t) {
      const double a = pitch[static_cast<std::size_t>(t - 1)].f0;
      const double b = pitch[static_cast<std::size_t>(t)].f0;
      if (a > 0.0 && b > 0.0) df0.push_back(b - a);
    }
    p(kF0DeltaMean) = mean_of(df0);
    p(kF0DeltaStd) = std_of(df0);
  }
  {
    const auto [mn, mx] = std::minmax_element(log_e.begin(), log_e.end());
    p(kLogEnergyMean) = mean_of(log_e);
    p(kLogEnergyStd) = std_of(log_e);
    p(kLogEnergyMin) = *mn;
    p(kLogEnergyMax) = *mx;
    p(kLogEnergyRange) = *mx - *mn;
    p(kLogEnergySlope) = slope_of(times, log_e);
  }
  const double voiced = static_cast<double>(f0_v.size());
  p(kVoicedRatio) = voiced / n_frames;

  int voiced_runs = 0;
  for (int t = 0; t < n_frames; ++t) {
    const bool v = pitch[static_cast<std::size_t>(t)].f0 > 0.0;
    const bool prev = t > 0 && pitch[static_cast<std::size_t>(t - 1)].f0 > 0.0;
    if (v && !prev) ++voiced_runs;
  }
  const int denom = token_count > 0 ? token_count : voiced_runs;
  p(kSpeakingRate) = denom > 0 ? voiced / denom : 0.0;

  p(kZcrMean) = mean_of(zcr);
  p(kZcrStd) = std_of(zcr);
  std::vector<double> de;
  for (std::size_t t = 1; t < log_e.size(); ++t) de.push_back(log_e[t] - log_e[t - 1]);
  p(kEnergyDeltaMean) = mean_of(de);
  p(kEnergyDeltaStd) = std_of(de);
  p(kCentroidMean) = mean_of(centroid);
  p(kCentroidStd) = std_of(centroid);
  p(kRolloffMean) = mean_of(rolloff);
  p(kRolloffStd) = std_of(rolloff);
  p(kRmsMean) = mean_of(rms);
  p(kRmsStd) = std_of(rms);
  const double rms_max = *std::max_element(rms.begin(), rms.end());
  p(kRmsMax) = rms_max;

  // Pauses: quiet frames; count internal runs only.
  const double quiet = std::max(1e-4, 0.05 * rms_max);
  int first_loud = -1;
  int last_loud = -1;
  int quiet_frames = 0;
  for (int t = 0; t < n_frames; ++t) {
    if (rms[static_cast<std::size_t>(t)] < quiet) {
      ++quiet_frames;
    } else {
      if (first_loud < 0) first_loud = t;
      last_loud = t;
    }
  }
  int pause_runs = 0;
  for (int t = first_loud + 1; first_loud >= 0 && t <= last_loud; ++t) {
    const bool q = rms[static_cast<std::size_t>(t)] < quiet;
    const bool prev_q = rms[static_cast<std::size_t>(t - 1)] < quiet;
    if (q && !prev_q) ++pause_runs;
  }
  p(kPauseRatio) = static_cast<double>(quiet_frames) / n_frames;
  p(kPauseCount) = pause_runs;
  p(kDurationSec) = audio.duration();
  p(kHnrMean) = mean_of(hnr);
  p(kHnrStd) = std_of(hnr);
  p(kFlatnessMean) = mean_of(flatness);
  p(kFlatnessStd) = std_of(flatness);
  return p;
}

void FeatureBundle::validate() const {
  if (mfcc.cols() != kMfccDim) throw ShapeError("mfcc width must be 39, got " + std::to_string(mfcc.cols()));
  if (prosody.size() != kProsodyDim) {
    throw ShapeError("prosody length must be 35, got " + std::to_string(prosody.size()));
  }
  if (token_embeddings.rows() != static_cast<Eigen::Index>(tokens.size())) {
    throw ShapeError("token embedding rows do not match token count");
  }
  if (token_embeddings.rows() > 0 && token_embeddings.cols() != kTokenEmbeddingDim) {
    throw ShapeError("token embeddings must be 300-dimensional");
  }
  if (!mfcc.allFinite() || !prosody.allFinite() || !token_embeddings.allFinite()) {
    throw ShapeError("non-finite feature values");
  }
}

FeatureBundle extract_features(const Waveform& audio, std::string_view text, const EmbeddingProvider& provider) {
  FeatureBundle f;
  f.tokens = tokenize(text);
  f.mfcc = extract_mfcc(audio);
  f.prosody = extract_prosody(audio, static_cast<int>(f.tokens.size()));
  f.token_embeddings = embed_tokens(f.tokens, provider);
  if (f.tokens.empty()) f.token_embeddings.resize(0, provider.dim());
  return f;
}

std::string_view norm_mode_name(NormMode m) {
  switch (m) {
    case NormMode::kNone: return "none";
    case NormMode::kMfcc: return "mfcc";
    case NormMode::kProsody: return "prosody";
    case NormMode::kBoth: return "both";
  }
  return "none";
}

NormMode parse_norm_mode(std::string_view name) {
  if (name == "none") return NormMode::kNone;
  if (name == "mfcc") return NormMode::kMfcc;
  if (name == "prosody") return NormMode::kProsody;
  if (name == "both") return NormMode::kBoth;
  throw Error("unknown normalization mode \"" + std::string(name) + "\" (expected none|mfcc|prosody|both)");
}

NormStats fit_normalizer(const std::vector<FeatureBundle>& features, std::string corpus_id) {
  if (features.empty()) throw Error("fit_normalizer: empty corpus");
  NormStats s;
  s.corpus_id = std::move(corpus_id);
  Eigen::Index frames = 0;
  Eigen::VectorXd msum = Eigen::VectorXd::Zero(kMfccDim);
  for (const auto& f : features) {
    if (f.mfcc.cols() != kMfccDim) throw ShapeError("fit_normalizer: mfcc width must be 39");
    msum += f.mfcc.colwise().sum().transpose();
    frames += f.mfcc.rows();
  }
  if (frames == 0) throw Error("fit_normalizer: no MFCC frames");
  s.mfcc_mean = msum / static_cast<double>(frames);
  Eigen::VectorXd mvar = Eigen::VectorXd::Zero(kMfccDim);
  for (const auto& f : features) {
    mvar += (f.mfcc.rowwise() - s.mfcc_mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  s.mfcc_std = (mvar / static_cast<double>(frames)).array().sqrt().max(s.epsilon).matrix();

  const auto n = static_cast<double>(features.size());
  Eigen::VectorXd psum = Eigen::VectorXd::Zero(kProsodyDim);
  for (const auto& f : features) {
    if (f.prosody.size() != kProsodyDim) throw ShapeError("fit_normalizer: prosody length must be 35");
    psum += f.prosody;
  }
  s.prosody_mean = psum / n;
  Eigen::VectorXd pvar = Eigen::VectorXd::Zero(kProsodyDim);
  for (const auto& f : features) pvar += (f.prosody - s.prosody_mean).array().square().matrix();
  s.prosody_std = (pvar / n).array().sqrt().max(s.epsilon).matrix();
  return s;
}

FeatureBundle apply_normalizer(const FeatureBundle& f, const NormStats& stats, NormMode mode) {
  FeatureBundle out = f;
  if (mode == NormMode::kMfcc || mode == NormMode::kBoth) {
    out.mfcc = ((f.mfcc.rowwise() - stats.mfcc_mean.transpose()).array().rowwise() /
                stats.mfcc_std.transpose().array())
                   .matrix();
  }
  if (mode == NormMode::kProsody || mode == NormMode::kBoth) {
    out.prosody = ((f.prosody - stats.prosody_mean).array() / stats.prosody_std.array()).matrix();
  }
  return out;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_json_vec(const nlohmann::json& j, const char* key, int expected) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (static_cast<int>(v.size()) != expected) {
    throw ParseError(std::string("norm stats field \"") + key + "\" has wrong length");
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), expected);
}

}  // namespace

std::string NormStats::to_json() const {
  nlohmann::json j = {{"corpus_id", corpus_id},
                      {"epsilon", epsilon},
                      {"mfcc_mean", to_vec(mfcc_mean)},
                      {"mfcc_std", to_vec(mfcc_std)},
                      {"prosody_mean", to_vec(prosody_mean)},
                      {"prosody_std", to_vec(prosody_std)}};
  return j.dump(2);
}

NormStats NormStats::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NormStats s;
    s.corpus_id = j.at("corpus_id").get<std::string>();
    s.epsilon = j.value("epsilon", kNormEpsilon);
    s.mfcc_mean = from_json_vec(j, "mfcc_mean", kMfccDim);
    s.mfcc_std = from_json_vec(j, "mfcc_std", kMfccDim);
    s.prosody_mean = from_json_vec(j, "prosody_mean", kProsodyDim);
    s.prosody_std = from_json_vec(j, "prosody_std", kProsodyDim);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid norm stats: ") + e.what());
  }
}

void NormStats::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write norm stats: " + path.string());
  out << to_json() << "\n";
}

NormStats NormStats::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read norm stats: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace styletts::corpus
