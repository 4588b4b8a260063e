// Operator entry points. Each subcommand wraps one library operation and
// leaves a run log (run_<command>.json) next to its output.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "styletts/corpus.hpp"
#include "styletts/error.hpp"
#include "styletts/evalkit.hpp"
#include "styletts/features.hpp"
#include "styletts/neural_vocoder.hpp"
#include "styletts/pipeline.hpp"
#include "styletts/service.hpp"
#include "styletts/style_model.hpp"
#include "styletts/synthetic.hpp"
#include "styletts/tts_train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace styletts;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string norm = "both";
  std::string vocoder = "dsp";
  std::string out;
};

// Directory that receives the run log: the output itself when it is a
// directory, otherwise its parent.
fs::path log_dir(const std::string& out) {
  if (out.empty()) return fs::current_path();
  const fs::path p(out);
  if (fs::is_directory(p) || !p.has_extension()) return p;
  return p.has_parent_path() ? p.parent_path() : fs::current_path();
}

void write_run_log(const std::string& command, const Common& c, const json& args, const std::string& status,
                   double seconds) {
  const fs::path dir = log_dir(c.out);
  fs::create_directories(dir);
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  json log{{"command", command}, {"seed", c.seed},       {"norm", c.norm},       {"vocoder", c.vocoder},
           {"out", c.out},       {"args", args},         {"status", status},     {"seconds", seconds},
           {"finished_at", stamp}};
  std::ofstream(dir / ("run_" + command + ".json")) << log.dump(2) << '\n';
}

std::vector<corpus::Corpus> load_manifests(const std::vector<std::string>& paths, const std::string& kind) {
  const auto k = kind == "external" ? corpus::CorpusKind::kExternal : corpus::CorpusKind::kTts;
  std::vector<corpus::Corpus> out;
  for (const auto& p : paths) out.push_back(corpus::load_manifest(p, k));
  return out;
}

std::string corpus_id_of(const corpus::Corpus& c, const std::string& fallback) {
  return c.utterances.empty() || c.utterances.front().corpus_id.empty() ? fallback : c.utterances.front().corpus_id;
}

std::map<std::string, StyleEmbedding> embedding_map(const std::vector<model::EmbeddingRecord>& records) {
  std::map<std::string, StyleEmbedding> m;
  for (const auto& r : records) m[r.id] = r.embedding;
  return m;
}

StyleEmbedding parse_embedding_list(const std::string& text) {
  StyleEmbedding e;
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= kNumStyles) throw Error("--embedding needs six comma-separated values");
    e.p[static_cast<std::size_t>(i++)] = std::stod(item);
  }
  if (i != kNumStyles) throw Error("--embedding needs six comma-separated values");
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style-embedded speech synthesis toolkit"};
  app.set_config("--config", "", "Read options from a config file");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--norm", common.norm, "Feature normalization: none, mfcc, prosody, both")
      ->check(CLI::IsMember({"none", "mfcc", "prosody", "both"}))
      ->capture_default_str();
  app.add_option("--vocoder", common.vocoder, "Vocoder: dsp or neural")
      ->check(CLI::IsMember({"dsp", "neural"}))
      ->capture_default_str();
  app.add_option("--out", common.out, "Output path");

  json args;
  std::function<void()> action;
  auto sub = [&](const std::string& name, const std::string& help) {
    auto* s = app.add_subcommand(name, help);
    return s;
  };

  // gen-synthetic
  int n_per_class = 20;
  double train_fraction = 1.0;
  double dev_fraction = 0.0;
  int sample_rate = kDefaultSampleRate;
  auto* gen = sub("gen-synthetic", "Generate the synthetic styled corpus");
  gen->add_option("--n", n_per_class, "Utterances per style")->capture_default_str();
  gen->add_option("--train-fraction", train_fraction)->capture_default_str();
  gen->add_option("--dev-fraction", dev_fraction)->capture_default_str();
  gen->add_option("--rate", sample_rate)->capture_default_str();
  gen->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("gen-synthetic needs --out DIR");
      corpus::SyntheticOptions o;
      o.sample_rate = sample_rate;
      o.train_fraction = train_fraction;
      o.dev_fraction = dev_fraction;
      const auto c = corpus::generate_synthetic_corpus(corpus::default_synthetic_spec(), n_per_class, common.seed, o);
      const auto manifest = corpus::save_corpus(c, common.out);
      std::cout << corpus::format_count_table(corpus::count_labels(c));
      std::cout << "manifest: " << manifest.string() << '\n';
      args = {{"n", n_per_class}, {"train_fraction", train_fraction}, {"dev_fraction", dev_fraction}};
    };
  });

  // extract-features
  std::string manifest;
  std::string corpus_kind = "tts";
  auto* feat = sub("extract-features", "Extract features and fit corpus normalization statistics");
  feat->add_option("--manifest", manifest)->required();
  feat->add_option("--kind", corpus_kind)->check(CLI::IsMember({"tts", "external"}))->capture_default_str();
  feat->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("extract-features needs --out DIR");
      const auto c = load_manifests({manifest}, corpus_kind).front();
      corpus::HashEmbeddingProvider provider(0);
      const auto features = model::extract_corpus_features(c, provider);
      const auto stats = corpus::fit_normalizer(features, corpus_id_of(c, "corpus"));
      fs::create_directories(common.out);
      stats.save(fs::path(common.out) / "norm_stats.json");
      std::ofstream out(fs::path(common.out) / "features.jsonl");
      const auto mode = corpus::parse_norm_mode(common.norm);
      for (std::size_t i = 0; i < features.size(); ++i) {
        const auto f = corpus::apply_normalizer(features[i], stats, mode);
        out << json{{"id", c.utterances[i].id},
                    {"frames", f.mfcc.rows()},
                    {"tokens", f.tokens},
                    {"prosody", std::vector<double>(f.prosody.data(), f.prosody.data() + f.prosody.size())}}
                   .dump()
            << '\n';
      }
      std::cout << "utterances: " << features.size() << '\n';
      args = {{"manifest", manifest}, {"kind", corpus_kind}};
    };
  });

  // train-classifier
  std::vector<std::string> manifests;
  std::vector<std::string> kinds;
  model::TrainConfig tcfg;
  int audio_hidden = 128;
  int text_hidden = 128;
  auto* trc = sub("train-classifier", "Train the multimodal style classifier");
  trc->add_option("--manifest", manifests, "Training corpora; each is normalized with its own statistics")
      ->required();
  trc->add_option("--kind", kinds, "tts or external per manifest (default tts)");
  trc->add_option("--epochs", tcfg.max_epochs)->capture_default_str();
  trc->add_option("--batch", tcfg.batch_size)->capture_default_str();
  trc->add_option("--lr", tcfg.learning_rate)->capture_default_str();
  trc->add_option("--patience", tcfg.patience)->capture_default_str();
  trc->add_option("--audio-hidden", audio_hidden)->capture_default_str();
  trc->add_option("--text-hidden", text_hidden)->capture_default_str();
  trc->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("train-classifier needs --out DIR");
      fs::create_directories(common.out);
      const auto mode = corpus::parse_norm_mode(common.norm);
      corpus::HashEmbeddingProvider provider(0);
      std::vector<model::LabeledExample> train_set;
      std::vector<model::LabeledExample> dev_set;
      for (std::size_t i = 0; i < manifests.size(); ++i) {
        const std::string kind = i < kinds.size() ? kinds[i] : "tts";
        const auto c = load_manifests({manifests[i]}, kind).front();
        const auto train_part = c.subset(corpus::Split::kTrain);
        const auto stats = corpus::fit_normalizer(model::extract_corpus_features(train_part, provider),
                                                  corpus_id_of(c, "corpus" + std::to_string(i)));
        stats.save(fs::path(common.out) / ("norm_" + stats.corpus_id + ".json"));
        auto tr = model::prepare_examples(train_part, provider, &stats, mode);
        auto dv = model::prepare_examples(c.subset(corpus::Split::kDev), provider, &stats, mode);
        train_set.insert(train_set.end(), tr.begin(), tr.end());
        dev_set.insert(dev_set.end(), dv.begin(), dv.end());
      }
      if (train_set.empty()) throw Error("no labeled training utterances");
      if (dev_set.empty()) dev_set = train_set;
      model::ClassifierConfig mc;
      mc.seed = common.seed;
      mc.audio_hidden = audio_hidden;
      mc.text_hidden = text_hidden;
      tcfg.seed = common.seed;
      auto result = model::train(model::StyleClassifier(mc), train_set, dev_set, tcfg);
      result.model.save(fs::path(common.out) / "classifier.ckpt");
      model::write_history_csv(fs::path(common.out) / "history.csv", result.history);
      const auto m = model::evaluate(result.model, dev_set, result.weights);
      const auto tm = model::evaluate(result.model, train_set, result.weights);
      json metrics{{"norm", common.norm},
                   {"best_epoch", result.best_epoch},
                   {"train_unweighted_acc", tm.unweighted_acc},
                   {"train_weighted_acc", tm.weighted_acc},
                   {"dev_unweighted_acc", m.unweighted_acc},
                   {"dev_weighted_acc", m.weighted_acc}};
      std::ofstream(fs::path(common.out) / "metrics.json") << metrics.dump(2) << '\n';
      std::cout << metrics.dump() << '\n';
      args = {{"manifests", manifests}, {"epochs", tcfg.max_epochs}, {"metrics", metrics}};
    };
  });

  // adapt-bn
  std::string model_path;
  auto* ada = sub("adapt-bn", "Replace BN statistics with target-corpus statistics");
  ada->add_option("--model", model_path)->required();
  ada->add_option("--manifest", manifest, "Target corpus")->required();
  ada->add_option("--kind", corpus_kind)->check(CLI::IsMember({"tts", "external"}))->capture_default_str();
  ada->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("adapt-bn needs --out FILE");
      const auto model = model::StyleClassifier::load(model_path);
      const auto c = load_manifests({manifest}, corpus_kind).front();
      corpus::HashEmbeddingProvider provider(0);
      const auto raw = model::extract_corpus_features(c, provider);
      const auto stats = corpus::fit_normalizer(raw, corpus_id_of(c, "target"));
      const auto mode = corpus::parse_norm_mode(common.norm);
      std::vector<corpus::FeatureBundle> target;
      for (const auto& f : raw) target.push_back(corpus::apply_normalizer(f, stats, mode));
      const auto adapted = model::adapt_bn(model, target);
      fs::path out(common.out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      adapted.save(out);
      stats.save(fs::path(out).replace_extension(".norm.json"));
      std::cout << "adapted on " << target.size() << " utterances\n";
      args = {{"model", model_path}, {"manifest", manifest}};
    };
  });

  // label-corpus
  std::string stats_path;
  auto* lab = sub("label-corpus", "Write a style embedding for every utterance");
  lab->add_option("--model", model_path)->required();
  lab->add_option("--manifest", manifest)->required();
  lab->add_option("--norm-stats", stats_path, "Target corpus statistics (fit on the corpus when omitted)");
  lab->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("label-corpus needs --out FILE");
      const auto model = model::StyleClassifier::load(model_path);
      const auto c = corpus::load_manifest(manifest);
      corpus::HashEmbeddingProvider provider(0);
      const auto stats = stats_path.empty()
                             ? corpus::fit_normalizer(model::extract_corpus_features(c, provider), corpus_id_of(c, "target"))
                             : corpus::NormStats::load(stats_path);
      const auto result = model::label_corpus(model, c, provider, stats, corpus::parse_norm_mode(common.norm));
      model::write_embeddings(common.out, result.records);
      if (!result.errors.empty()) {
        std::ofstream err(fs::path(common.out).replace_extension(".errors.jsonl"));
        for (const auto& e : result.errors) err << json{{"id", e.id}, {"error", e.message}}.dump() << '\n';
      }
      std::cout << "labeled " << result.records.size() << ", skipped " << result.errors.size() << '\n';
      args = {{"model", model_path}, {"manifest", manifest}, {"skipped", result.errors.size()}};
    };
  });

  // train-tts
  std::string embeddings_path;
  tts::TtsTrainConfig ttcfg;
  auto* trt = sub("train-tts", "Train the prosody and acoustic models");
  trt->add_option("--manifest", manifest)->required();
  trt->add_option("--embeddings", embeddings_path, "Per-utterance style embeddings (JSONL)");
  trt->add_option("--epochs", ttcfg.epochs)->capture_default_str();
  trt->add_option("--batch", ttcfg.batch_size)->capture_default_str();
  trt->add_option("--lr", ttcfg.learning_rate)->capture_default_str();
  trt->add_option("--prosody-hidden", ttcfg.prosody_hidden)->capture_default_str();
  trt->add_option("--acoustic-hidden", ttcfg.acoustic_hidden)->capture_default_str();
  trt->add_flag("--zero-style", ttcfg.zero_style, "Baseline: train without the style input");
  trt->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("train-tts needs --out DIR");
      const auto c = corpus::load_manifest(manifest);
      std::map<std::string, StyleEmbedding> emb;
      if (!embeddings_path.empty()) emb = embedding_map(model::read_embeddings(embeddings_path));
      if (ttcfg.zero_style) {
        for (const auto& u : c.utterances) emb.try_emplace(u.id, StyleEmbedding{});
      }
      ttcfg.seed = common.seed;
      ttcfg.parallel = false;
      const auto result = tts::train_tts(c, emb, tts::Lexicon::shipped(), ttcfg);
      result.models.save(fs::path(common.out) / "tts");
      tts::write_tts_history_csv(fs::path(common.out) / "tts_history.csv", result.history);
      std::cout << "loss " << result.history.front().total() << " -> " << result.history.back().total() << '\n';
      args = {{"manifest", manifest}, {"epochs", ttcfg.epochs}, {"zero_style", ttcfg.zero_style}};
    };
  });

  // train-vocoder
  tts::NeuralVocoderConfig vcfg;
  auto* trv = sub("train-vocoder", "Train the neural vocoder on a corpus's own analysis frames");
  trv->add_option("--manifest", manifest)->required();
  trv->add_option("--epochs", vcfg.epochs)->capture_default_str();
  trv->add_option("--hidden", vcfg.hidden)->capture_default_str();
  trv->add_option("--lr", vcfg.learning_rate)->capture_default_str();
  trv->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("train-vocoder needs --out DIR");
      const auto c = corpus::load_manifest(manifest);
      std::vector<tts::VocoderExample> data;
      for (const auto& u : c.utterances) data.push_back(tts::make_vocoder_example(corpus::load_audio(c, u)));
      vcfg.seed = common.seed;
      const auto result = tts::train_neural_vocoder(data, vcfg);
      fs::create_directories(common.out);
      result.model.save(fs::path(common.out) / "vocoder.ckpt");
      std::cout << "loss " << result.loss_history.front() << " -> " << result.loss_history.back() << '\n';
      args = {{"manifest", manifest}, {"epochs", vcfg.epochs}, {"hidden", vcfg.hidden}};
    };
  });

  // synthesize
  std::string models_dir;
  std::string text;
  std::string style_name_arg;
  std::string embedding_arg;
  std::string query_audio;
  std::string query_text;
  std::string speaker = "spk0";
  auto* syn = sub("synthesize", "Synthesize text in a style");
  syn->add_option("--models", models_dir, "Model bundle directory")->required();
  syn->add_option("--text", text)->required();
  syn->add_option("--style", style_name_arg, "Named style");
  syn->add_option("--embedding", embedding_arg, "Six comma-separated probabilities");
  syn->add_option("--query-audio", query_audio, "Query WAV whose style is extracted");
  syn->add_option("--query-text", query_text);
  syn->add_option("--speaker", speaker)->capture_default_str();
  syn->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("synthesize needs --out FILE.wav");
      auto bundle = pipeline::load_bundle(models_dir, pipeline::parse_vocoder(common.vocoder));
      bundle.seed = common.seed;
      pipeline::SynthesisRequest req;
      req.text = text;
      req.speaker = speaker;
      if (!style_name_arg.empty()) req.named_style = style_name_arg;
      if (!embedding_arg.empty()) req.embedding = parse_embedding_list(embedding_arg);
      if (!query_audio.empty()) req.query = pipeline::QueryRef{query_audio, query_text, std::nullopt};
      const auto out = pipeline::synthesize(req, bundle);
      write_wav(common.out, out.audio);
      json emb(out.embedding.p);
      std::cout << "embedding " << emb.dump() << '\n';
      args = {{"models", models_dir}, {"text", text}, {"embedding", emb}};
    };
  });

  // respond
  auto* rsp = sub("respond", "Answer a speech query in the query's style");
  rsp->add_option("--models", models_dir)->required();
  rsp->add_option("--query-audio", query_audio)->required();
  rsp->add_option("--query-text", query_text)->required();
  rsp->add_option("--text", text, "Response text")->required();
  rsp->add_option("--speaker", speaker)->capture_default_str();
  rsp->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("respond needs --out FILE.wav");
      auto bundle = pipeline::load_bundle(models_dir, pipeline::parse_vocoder(common.vocoder));
      bundle.seed = common.seed;
      const auto query = read_wav(query_audio, bundle.sample_rate);
      const auto out = pipeline::respond(query, query_text, text, bundle, speaker);
      write_wav(common.out, out.audio);
      json emb(out.embedding.p);
      std::cout << "embedding " << emb.dump() << '\n';
      args = {{"models", models_dir}, {"query_audio", query_audio}, {"embedding", emb}};
    };
  });

  // build-abx
  int per_style = 2;
  auto* abx = sub("build-abx", "Synthesize an ABX stimulus pool and item list");
  abx->add_option("--models", models_dir)->required();
  abx->add_option("--per-style", per_style, "Samples per style")->capture_default_str();
  abx->callback([&] {
    action = [&] {
      if (common.out.empty()) throw Error("build-abx needs --out DIR");
      auto bundle = pipeline::load_bundle(models_dir, pipeline::parse_vocoder(common.vocoder));
      bundle.seed = common.seed;
      const auto& sentences = corpus::neutral_sentences();
      fs::create_directories(fs::path(common.out) / "media");
      eval::AbxPool pool;
      for (StyleLabel s : kAllStyles) {
        for (int k = 0; k < per_style; ++k) {
          const auto& sentence = sentences[static_cast<std::size_t>(k) % sentences.size()];
          const auto out = pipeline::synthesize_with(sentence, pipeline::make_style_embedding(s), "spk0", bundle);
          const std::string ref = "media/" + std::string(style_name(s)) + "_" + std::to_string(k) + ".wav";
          write_wav(fs::path(common.out) / ref, out.audio);
          pool[s].push_back(ref);
        }
      }
      std::vector<StyleLabel> styles(kAllStyles.begin(), kAllStyles.end());
      const auto items = eval::build_abx(styles, pool, common.seed);
      eval::write_abx_items(fs::path(common.out) / "abx_items.jsonl", items);
      std::cout << "items: " << items.size() << '\n';
      args = {{"models", models_dir}, {"per_style", per_style}, {"items", items.size()}};
    };
  });

  // f0-stats
  auto* f0s = sub("f0-stats", "Per-style F0 statistics of a labeled corpus");
  f0s->add_option("--manifest", manifest)->required();
  f0s->callback([&] {
    action = [&] {
      const auto c = corpus::load_manifest(manifest);
      std::map<StyleLabel, std::vector<Waveform>> groups;
      for (const auto& u : c.utterances) {
        if (u.style_label) groups[*u.style_label].push_back(corpus::load_audio(c, u));
      }
      const auto table = eval::f0_statistics(groups);
      std::cout << eval::format_f0_table(table);
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        std::ofstream(fs::path(common.out) / "f0_stats.csv") << eval::f0_table_csv(table);
        std::ofstream(fs::path(common.out) / "f0_stats.txt") << eval::format_f0_table(table);
      }
      args = {{"manifest", manifest}};
    };
  });

  // serve
  std::string service_config;
  std::string state_dir;
  int port = -1;
  auto* srv = sub("serve", "Run the synthesis and listening-test service");
  srv->add_option("--service-config", service_config, "Service JSON config");
  srv->add_option("--models", models_dir);
  srv->add_option("--state", state_dir, "Item lists and answer logs");
  srv->add_option("--port", port);
  srv->callback([&] {
    action = [&] {
      service::ServiceConfig cfg =
          service_config.empty() ? service::ServiceConfig{} : service::ServiceConfig::from_file(service_config);
      cfg.apply_env();
      if (!models_dir.empty()) cfg.model_dir = models_dir;
      if (!state_dir.empty()) cfg.state_dir = state_dir;
      if (port >= 0) cfg.port = port;
      if (app.count("--vocoder") > 0) cfg.vocoder = common.vocoder;
      service::Server server(cfg, std::make_shared<pipeline::ModelRegistry>());
      if (!cfg.model_dir.empty()) server.reload_models();
      const int bound = server.bind();
      std::cout << "listening on " << cfg.host << ":" << bound << std::endl;
      server.run();
      args = {{"port", bound}, {"state", cfg.state_dir.string()}};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::cout << "seed: " << common.seed << std::endl;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    action();
    write_run_log(command, common, args, "ok", elapsed());
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: " << msg << '\n';
    try {
      write_run_log(command, common, args, std::string("error: ") + msg, elapsed());
    } catch (...) {
    }
    return 1;
  }
  return 0;
}
