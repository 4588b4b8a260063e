#include "styletts/tts_train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <set>

#include "styletts/error.hpp"
#include "styletts/features.hpp"
#include "styletts/nn/optim.hpp"
#include "styletts/pitch.hpp"

namespace styletts::tts {

TtsTargets extract_tts_targets(const Waveform& audio, const std::string& text, const Lexicon& lexicon) {
  TtsTargets out;
  out.ling = text_to_linguistic(text, lexicon);
  const Matrix cep = corpus::extract_cepstra(audio);
  const auto frames = track_pitch(audio);
  std::vector<double> f0(frames.size());
  std::transform(frames.begin(), frames.end(), f0.begin(), [](const PitchFrame& f) { return f.f0; });
  f0.resize(static_cast<std::size_t>(cep.rows()), 0.0);
  const int n_frames = static_cast<int>(cep.rows());

  int first = -1;
  int last = -1;
  for (int t = 0; t < n_frames; ++t) {
    if (f0[static_cast<std::size_t>(t)] > 0.0) {
      if (first < 0) first = t;
      last = t;
    }
  }
  if (first < 0) {
    // Breathy takes can stay below the voicing threshold; fall back to the
    // loud part of the utterance.
    double loudest = 0.0;
    for (const auto& f : frames) loudest = std::max(loudest, f.rms);
    for (int t = 0; t < n_frames && t < static_cast<int>(frames.size()); ++t) {
      if (frames[static_cast<std::size_t>(t)].rms >= 0.1 * loudest && loudest > 0.0) {
        if (first < 0) first = t;
        last = t;
      }
    }
  }
  if (first < 0) throw Error("no voiced or audible frames to align against");
  first = std::max(0, first - 2);
  last = std::min(n_frames - 1, last + 2);
  const int span = last - first + 1;
  const int n_ph = static_cast<int>(out.ling.size());
  if (span < n_ph) throw Error("voiced region shorter than the phoneme count");

  out.cepstra = cep.middleRows(first, span);
  out.f0.assign(f0.begin() + first, f0.begin() + first + span);
  int prev = 0;
  for (int p = 1; p <= n_ph; ++p) {
    const int edge = static_cast<int>(std::lround(static_cast<double>(p) * span / n_ph));
    out.durations.push_back(edge - prev);
    prev = edge;
  }
  int start = 0;
  for (int p = 0; p < n_ph; ++p) {
    const int d = out.durations[static_cast<std::size_t>(p)];
    int voiced = 0;
    double s = 0.0;
    double e = 0.0;
    for (int k = 0; k < d; ++k) {
      const double v = out.f0[static_cast<std::size_t>(start + k)];
      if (v > 0.0) {
        if (voiced == 0) s = v;
        e = v;
        ++voiced;
      }
    }
    const bool is_voiced = 2 * voiced >= d && voiced > 0;
    out.phoneme_voiced.push_back(is_voiced);
    out.f0_start.push_back(is_voiced ? s : 0.0);
    out.f0_end.push_back(is_voiced ? e : 0.0);
    start += d;
  }
  return out;
}

void TtsModels::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  prosody.save(dir / "prosody.ckpt");
  acoustic.save(dir / "acoustic.ckpt");
  std::ofstream meta(dir / "tts.json");
  meta << "{\"zero_style\": " << (zero_style ? "true" : "false") << "}\n";
}

TtsModels TtsModels::load(const std::filesystem::path& dir) {
  TtsModels m{ProsodyModel::load(dir / "prosody.ckpt"), AcousticModel::load(dir / "acoustic.ckpt"), false};
  std::ifstream meta(dir / "tts.json");
  std::string content((std::istreambuf_iterator<char>(meta)), std::istreambuf_iterator<char>());
  m.zero_style = content.find("\"zero_style\": true") != std::string::npos;
  return m;
}

namespace {

struct Item {
  std::string id;
  TtsTargets targets;
  StyleEmbedding style;
  int speaker = 0;
  ProsodyTargets prosody;
  Matrix acoustic_in;
  Matrix acoustic_out;
};

void scale_grads(const nn::ParamList& params, double s) {
  for (nn::Param* p : params) p->grad *= s;
}

// Mini-batches of item indices in a seeded order.
std::vector<std::vector<std::size_t>> batches(std::size_t n, int batch, nn::Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(batch)) {
    out.emplace_back(order.begin() + static_cast<long>(s),
                     order.begin() + static_cast<long>(std::min(n, s + static_cast<std::size_t>(batch))));
  }
  return out;
}

std::vector<double> train_prosody(ProsodyModel& model, std::vector<Item>& items, const TtsTrainConfig& cfg) {
  std::vector<double> history;
  auto eval = [&]() {
    double total = 0.0;
    for (const auto& it : items) {
      const Matrix pred = model.forward(it.targets.ling, it.style, it.speaker);
      total += nn::masked_mse(pred, it.prosody.values, it.prosody.mask, nullptr);
    }
    return total / static_cast<double>(items.size());
  };
  history.push_back(eval());
  nn::AdamConfig ac;
  ac.lr = cfg.learning_rate;
  nn::Adam adam(ac);
  nn::Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& b : batches(items.size(), cfg.batch_size, rng)) {
      const auto params = model.params();
      nn::zero_grads(params);
      for (std::size_t i : b) {
        const auto& it = items[i];
        total += model.accumulate_gradients(it.targets.ling, it.style, it.speaker, it.prosody);
      }
      scale_grads(params, 1.0 / static_cast<double>(b.size()));
      adam.step(params);
    }
    history.push_back(total / static_cast<double>(items.size()));
  }
  return history;
}

std::vector<double> train_acoustic(AcousticModel& model, std::vector<Item>& items, const TtsTrainConfig& cfg) {
  std::vector<double> history;
  auto eval = [&]() {
    double total = 0.0;
    for (const auto& it : items) {
      total += nn::masked_mse(model.forward(it.acoustic_in), it.acoustic_out, Matrix(), nullptr);
    }
    return total / static_cast<double>(items.size());
  };
  history.push_back(eval());
  nn::AdamConfig ac;
  ac.lr = cfg.learning_rate;
  nn::Adam adam(ac);
  nn::Rng rng(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& b : batches(items.size(), cfg.batch_size, rng)) {
      std::vector<const Matrix*> in;
      std::vector<const Matrix*> out;
      std::vector<int> spk;
      for (std::size_t i : b) {
        in.push_back(&items[i].acoustic_in);
        out.push_back(&items[i].acoustic_out);
        spk.push_back(items[i].speaker);
      }
      const auto params = model.params();
      nn::zero_grads(params);
      total += model.accumulate_gradients(in, out, spk) * static_cast<double>(b.size());
      adam.step(params);
    }
    history.push_back(total / static_cast<double>(items.size()));
  }
  return history;
}

}  // namespace

TtsTrainResult train_tts(const corpus::Corpus& corpus, const std::map<std::string, StyleEmbedding>& embeddings,
                         const Lexicon& lexicon, const TtsTrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size <= 0) throw Error("train_tts: invalid epochs or batch size");
  const auto train_utts = corpus.select(corpus::Split::kTrain);
  if (train_utts.empty()) throw Error("train_tts: no training utterances");

  std::string missing;
  for (const auto* u : train_utts) {
    if (!embeddings.count(u->id)) missing += (missing.empty() ? "" : ", ") + u->id;
  }
  if (!missing.empty()) throw Error("train_tts: utterances without a style embedding: " + missing);

  std::set<std::string> speaker_set;
  for (const auto* u : train_utts) speaker_set.insert(u->speaker_id.empty() ? "spk0" : u->speaker_id);
  SpeakerTable speakers{std::vector<std::string>(speaker_set.begin(), speaker_set.end())};

  std::vector<Item> items;
  for (const auto* u : train_utts) {
    Item it;
    it.id = u->id;
    try {
      it.targets = extract_tts_targets(corpus::load_audio(corpus, *u), u->text, lexicon);
    } catch (const std::exception& e) {
      throw Error("train_tts: target extraction failed for " + u->id + ": " + e.what());
    }
    if (!cfg.zero_style) {
      it.style = embeddings.at(u->id);
      if (!on_simplex(it.style)) throw Error("train_tts: embedding of " + u->id + " is not on the simplex");
    }
    it.speaker = speakers.index(u->speaker_id.empty() ? "spk0" : u->speaker_id);
    items.push_back(std::move(it));
  }

  ProsodyModelConfig pcfg;
  pcfg.hidden = cfg.prosody_hidden;
  pcfg.speaker_dim = cfg.speaker_dim;
  pcfg.seed = cfg.seed;
  pcfg.speakers = speakers;
  AcousticModelConfig acfg;
  acfg.hidden = cfg.acoustic_hidden;
  acfg.layers = cfg.acoustic_layers;
  acfg.speaker_dim = cfg.speaker_dim;
  acfg.seed = cfg.seed + 1;
  acfg.speakers = speakers;
  TtsModels models{ProsodyModel(pcfg), AcousticModel(acfg), cfg.zero_style};

  // Target normalization from the training set.
  std::vector<double> log_durs;
  std::vector<double> voiced_f0;
  for (const auto& it : items) {
    for (int d : it.targets.durations) log_durs.push_back(std::log(static_cast<double>(d)));
    for (double v : it.targets.f0) {
      if (v > 0.0) voiced_f0.push_back(v);
    }
  }
  auto mean_std = [](const std::vector<double>& v, double fallback_std) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(std::max<std::size_t>(1, v.size()));
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    s = std::sqrt(s / static_cast<double>(std::max<std::size_t>(1, v.size())));
    return std::pair{m, s > 1e-6 ? s : fallback_std};
  };
  auto& pn = models.prosody.norm();
  std::tie(pn.log_dur_mean, pn.log_dur_std) = mean_std(log_durs, 1.0);
  std::tie(pn.f0_mean, pn.f0_std) = mean_std(voiced_f0, 1.0);
  models.acoustic.f0_mean = pn.f0_mean;
  models.acoustic.f0_std = pn.f0_std;

  Eigen::Index total_frames = 0;
  for (const auto& it : items) total_frames += it.targets.cepstra.rows();
  Matrix all(total_frames, kAcousticDim);
  {
    Eigen::Index r = 0;
    for (const auto& it : items) {
      all.middleRows(r, it.targets.cepstra.rows()) = it.targets.cepstra;
      r += it.targets.cepstra.rows();
    }
  }
  const Eigen::RowVectorXd cmean = all.colwise().mean();
  const Eigen::RowVectorXd cstd =
      ((all.rowwise() - cmean).array().square().colwise().mean()).sqrt().max(1e-6).matrix();
  models.acoustic.target_mean() = cmean;
  models.acoustic.target_std() = cstd;

  for (auto& it : items) {
    const auto n = static_cast<Eigen::Index>(it.targets.durations.size());
    it.prosody.values = Matrix::Zero(n, 4);
    it.prosody.mask = Matrix::Ones(n, 4);
    for (Eigen::Index p = 0; p < n; ++p) {
      const auto k = static_cast<std::size_t>(p);
      it.prosody.values(p, 0) = (std::log(static_cast<double>(it.targets.durations[k])) - pn.log_dur_mean) / pn.log_dur_std;
      if (it.targets.phoneme_voiced[k]) {
        it.prosody.values(p, 1) = (it.targets.f0_start[k] - pn.f0_mean) / pn.f0_std;
        it.prosody.values(p, 2) = (it.targets.f0_end[k] - pn.f0_mean) / pn.f0_std;
        it.prosody.values(p, 3) = 1.0;
      } else {
        it.prosody.mask(p, 1) = 0.0;
        it.prosody.mask(p, 2) = 0.0;
      }
    }
    const Matrix frame_ling = upsample_linguistic(it.targets.ling, it.targets.durations);
    it.acoustic_in = models.acoustic.build_inputs(frame_ling, it.targets.f0, it.style, it.speaker);
    it.acoustic_out = ((it.targets.cepstra.rowwise() - cmean).array().rowwise() / cstd.array()).matrix();
  }

  std::vector<double> p_hist;
  std::vector<double> a_hist;
  if (cfg.parallel) {
    // Independent parameters over a shared read-only item list.
    auto fut = std::async(std::launch::async, [&] { return train_prosody(models.prosody, items, cfg); });
    a_hist = train_acoustic(models.acoustic, items, cfg);
    p_hist = fut.get();
  } else {
    p_hist = train_prosody(models.prosody, items, cfg);
    a_hist = train_acoustic(models.acoustic, items, cfg);
  }
  models.prosody.set_trained(true);
  models.acoustic.set_trained(true);

  TtsTrainResult result{std::move(models), {}};
  for (std::size_t e = 0; e < p_hist.size(); ++e) {
    result.history.push_back({static_cast<int>(e), p_hist[e], a_hist[e]});
  }
  return result;
}

void write_tts_history_csv(const std::filesystem::path& path, const std::vector<TtsEpoch>& history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,prosody_loss,acoustic_loss,total_loss\n";
  out.precision(10);
  for (const auto& h : history) {
    out << h.epoch << ',' << h.prosody_loss << ',' << h.acoustic_loss << ',' << h.total() << '\n';
  }
}

}  // namespace styletts::tts
