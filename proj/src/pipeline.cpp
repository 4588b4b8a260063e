#include "styletts/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "styletts/acoustic_model.hpp"
#include "styletts/prosody_model.hpp"

namespace styletts::pipeline {

StyleEmbedding make_style_embedding(StyleLabel style) {
  StyleEmbedding e;
  e.p.fill(kOtherWeight);
  e.p[static_cast<std::size_t>(style_index(style))] = kSelectedWeight;
  return e;
}

StyleEmbedding make_style_embedding(std::string_view name) {
  const auto s = parse_style(name);
  if (!s) throw Error("unknown style \"" + std::string(name) + "\"");
  return make_style_embedding(*s);
}

StyleEmbedding mix_style_embedding(const std::map<StyleLabel, double>& weights) {
  double total = 0.0;
  for (const auto& [s, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) throw Error("style weight for " + std::string(style_name(s)) + " is negative");
    total += w;
  }
  if (total <= 0.0) throw Error("style weights are all zero");
  StyleEmbedding e;
  for (const auto& [s, w] : weights) e.p[static_cast<std::size_t>(style_index(s))] = w / total;
  return e;
}

StyleEmbedding mix_style_embedding(const std::map<std::string, double>& weights) {
  std::map<StyleLabel, double> by_label;
  for (const auto& [name, w] : weights) {
    const auto s = parse_style(name);
    if (!s) throw Error("unknown style \"" + name + "\"");
    by_label[*s] += w;
  }
  return mix_style_embedding(by_label);
}

StageError::StageError(std::string stage, const std::string& message)
    : Error(stage + ": " + message), stage_(std::move(stage)) {}

void SynthesisRequest::validate() const {
  const int sources = (embedding ? 1 : 0) + (named_style ? 1 : 0) + (query ? 1 : 0);
  if (sources != 1) {
    throw Error(sources == 0 ? "request has no style source"
                             : "request has more than one style source");
  }
  if (embedding && !on_simplex(*embedding)) throw Error("style embedding must be non-negative and sum to 1");
}

std::string_view vocoder_name(VocoderKind k) { return k == VocoderKind::kDsp ? "dsp" : "neural"; }

VocoderKind parse_vocoder(std::string_view name) {
  if (name == "dsp") return VocoderKind::kDsp;
  if (name == "neural") return VocoderKind::kNeural;
  throw Error("unknown vocoder \"" + std::string(name) + "\"");
}

StyleEmbedding extract_query_style(const StyleExtractor& extractor, const Waveform& audio, std::string_view text) {
  if (!extractor.provider) throw Error("style extractor has no embedding provider");
  const auto raw = corpus::extract_features(audio, text, *extractor.provider);
  return extractor.classifier.embed(corpus::apply_normalizer(raw, extractor.query_stats, extractor.mode));
}

ModelBundle load_bundle(const std::filesystem::path& dir, VocoderKind vocoder,
                        std::shared_ptr<const corpus::EmbeddingProvider> provider) {
  ModelBundle b{tts::TtsModels::load(dir / "tts"), tts::Lexicon::shipped(), std::nullopt, std::nullopt, vocoder};
  if (std::filesystem::exists(dir / "classifier.ckpt")) {
    StyleExtractor ex{model::StyleClassifier::load(dir / "classifier.ckpt"),
                      corpus::NormStats::load(dir / "query_norm.json"), corpus::NormMode::kBoth,
                      provider ? provider : std::make_shared<corpus::HashEmbeddingProvider>()};
    if (std::filesystem::exists(dir / "norm_mode.txt")) {
      std::ifstream in(dir / "norm_mode.txt");
      std::string mode;
      in >> mode;
      ex.mode = corpus::parse_norm_mode(mode);
    }
    b.extractor = std::move(ex);
  }
  if (std::filesystem::exists(dir / "vocoder.ckpt")) b.neural_vocoder = tts::NeuralVocoder::load(dir / "vocoder.ckpt");
  if (vocoder == VocoderKind::kNeural && !b.neural_vocoder) throw Error("neural vocoder requested but not in " + dir.string());
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  bundle.tts.save(dir / "tts");
  if (bundle.extractor) {
    bundle.extractor->classifier.save(dir / "classifier.ckpt");
    bundle.extractor->query_stats.save(dir / "query_norm.json");
    std::ofstream(dir / "norm_mode.txt") << corpus::norm_mode_name(bundle.extractor->mode) << '\n';
  }
  if (bundle.neural_vocoder) bundle.neural_vocoder->save(dir / "vocoder.ckpt");
}

StyleEmbedding resolve_style(const SynthesisRequest& request, const ModelBundle& models) {
  request.validate();
  StyleEmbedding e;
  if (request.embedding) {
    e = *request.embedding;
  } else if (request.named_style) {
    e = make_style_embedding(*request.named_style);
  } else {
    if (!models.extractor) throw StageError("style", "no style extractor loaded for query requests");
    const auto& q = *request.query;
    Waveform audio;
    try {
      audio = q.audio ? *q.audio : read_wav(q.audio_ref, models.sample_rate);
    } catch (const std::exception& ex) {
      throw StageError("style", std::string("unreadable query audio: ") + ex.what());
    }
    e = extract_query_style(*models.extractor, audio, q.transcript);
  }
  if (!on_simplex(e)) throw Error("style embedding is not on the probability simplex");
  return e;
}

SynthesisResult synthesize_with(const std::string& text, const StyleEmbedding& style, const std::string& speaker,
                                const ModelBundle& models) {
  if (!on_simplex(style)) throw Error("style embedding is not on the probability simplex");
  SynthesisResult r;
  r.embedding = style;
  // Baseline models were trained without style input.
  const StyleEmbedding cond = models.tts.zero_style ? StyleEmbedding{} : style;

  tts::LinguisticSequence ling;
  try {
    ling = tts::text_to_linguistic(text, models.lexicon);
  } catch (const std::exception& ex) {
    throw StageError("frontend", ex.what());
  }
  try {
    r.prosody = tts::predict_prosody(models.tts.prosody, ling, cond, speaker);
    r.prosody.validate();
  } catch (const std::exception& ex) {
    throw StageError("prosody", ex.what());
  }
  tts::AcousticFrames frames;
  try {
    frames = tts::predict_acoustic(models.tts.acoustic, tts::upsample_linguistic(ling, r.prosody.durations),
                                   r.prosody, cond, speaker);
  } catch (const std::exception& ex) {
    throw StageError("acoustic", ex.what());
  }
  try {
    if (models.vocoder == VocoderKind::kNeural) {
      if (!models.neural_vocoder) throw Error("no neural vocoder loaded");
      r.audio = tts::vocode_neural(*models.neural_vocoder, frames, r.prosody.f0, models.seed);
    } else {
      tts::DspVocoderConfig vc;
      vc.sample_rate = models.sample_rate;
      vc.noise_seed = models.seed;
      r.audio = tts::vocode_dsp(frames, r.prosody.f0, vc);
    }
  } catch (const std::exception& ex) {
    throw StageError("vocoder", ex.what());
  }
  return r;
}

SynthesisResult synthesize(const SynthesisRequest& request, const ModelBundle& models) {
  const StyleEmbedding e = resolve_style(request, models);
  return synthesize_with(request.text, e, request.speaker, models);
}

SynthesisResult respond(const Waveform& query_audio, std::string_view query_text, const std::string& response_text,
                        const ModelBundle& models, const std::string& speaker) {
  if (response_text.empty()) throw Error("response text is empty");
  SynthesisRequest req;
  req.text = response_text;
  req.query = QueryRef{{}, std::string(query_text), query_audio};
  req.speaker = speaker;
  return synthesize(req, models);
}

std::shared_ptr<const ModelBundle> ModelRegistry::get() const {
  std::lock_guard lock(mu_);
  return current_;
}

void ModelRegistry::swap(std::shared_ptr<const ModelBundle> next) {
  std::lock_guard lock(mu_);
  current_.swap(next);
}

}  // namespace styletts::pipeline
