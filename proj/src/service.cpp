#include "styletts/service.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <random>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "styletts/embedding.hpp"

namespace styletts::service {

using nlohmann::json;

ServiceConfig ServiceConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read service config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("service config " + path.string() + ": " + e.what());
  }
  ServiceConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.model_dir = j.value("model_dir", std::string());
  c.state_dir = j.value("state_dir", c.state_dir.string());
  c.vocoder = j.value("vocoder", c.vocoder);
  return c;
}

void ServiceConfig::apply_env() {
  if (const char* v = std::getenv("STYLETTS_HOST")) host = v;
  if (const char* v = std::getenv("STYLETTS_PORT")) port = std::stoi(v);
  if (const char* v = std::getenv("STYLETTS_MODEL_DIR")) model_dir = v;
  if (const char* v = std::getenv("STYLETTS_STATE_DIR")) state_dir = v;
  if (const char* v = std::getenv("STYLETTS_VOCODER")) vocoder = v;
}

std::string_view test_kind_name(TestKind k) {
  switch (k) {
    case TestKind::kAbx:
      return "abx";
    case TestKind::kPreference:
      return "preference";
    case TestKind::kQueryMatch:
      return "query_match";
  }
  return "abx";
}

std::optional<TestKind> parse_test_kind(std::string_view s) {
  for (TestKind k : {TestKind::kAbx, TestKind::kPreference, TestKind::kQueryMatch}) {
    if (test_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  return hex64(rng()) + hex64(rng());
}

// Per (session, item) presentation order of the three preference stimuli.
std::array<int, 3> option_order(const std::string& session, const std::string& item) {
  std::array<int, 3> order{0, 1, 2};
  const auto h = corpus::fnv1a64(session + "/" + item);
  for (std::uint64_t k = h % 6; k > 0; --k) std::next_permutation(order.begin(), order.end());
  return order;
}

}  // namespace

AnswerLog::AnswerLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error("cannot open log " + path_.string());
}

void AnswerLog::append(const eval::LoggedAnswer& a) {
  const std::string line = eval::to_jsonl(a) + "\n";
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error("write to " + path_.string() + " failed");
}

ListeningTests::ListeningTests(const std::filesystem::path& state_dir) : state_dir_(state_dir) {
  std::filesystem::create_directories(state_dir_);
  if (std::filesystem::exists(state_dir_ / "abx_items.jsonl")) {
    set_items(eval::read_abx_items(state_dir_ / "abx_items.jsonl"));
  }
  if (std::filesystem::exists(state_dir_ / "preference_items.jsonl")) {
    set_items(eval::read_preference_items(state_dir_ / "preference_items.jsonl"));
  }
  if (std::filesystem::exists(state_dir_ / "query_items.jsonl")) {
    set_items(eval::read_query_items(state_dir_ / "query_items.jsonl"));
  }
  // Replay the session index; cursors follow from the answer log.
  if (std::filesystem::exists(state_dir_ / "sessions.jsonl")) {
    std::ifstream in(state_dir_ / "sessions.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      const auto kind = parse_test_kind(j.at("kind").get<std::string>());
      if (!kind) throw ParseError("sessions.jsonl: unknown test kind");
      Session s{j.at("session_id").get<std::string>(), *kind, 0, j.value("timestamp", "")};
      sessions_[s.id] = s;
    }
  }
  answers_ = eval::read_answer_log(state_dir_ / "answers.jsonl");
  for (const auto& a : answers_) {
    auto it = sessions_.find(a.session_id);
    if (it != sessions_.end()) ++it->second.cursor;
  }
  log_ = std::make_unique<AnswerLog>(state_dir_ / "answers.jsonl");
  session_index_ = std::make_unique<AnswerLog>(state_dir_ / "sessions.jsonl");
}

std::string ListeningTests::media_url(const std::string& ref) {
  std::filesystem::path p(ref);
  if (p.is_relative()) p = state_dir_ / p;
  const std::string name = hex64(corpus::fnv1a64(p.string()));
  media_[name] = p;
  return "/media/" + name + ".wav";
}

void ListeningTests::set_items(std::vector<eval::AbxItem> items) {
  std::lock_guard lock(mu_);
  abx_ = std::move(items);
  for (const auto& it : abx_) {
    media_url(it.audio_a);
    media_url(it.audio_b);
    media_url(it.audio_x);
  }
}

void ListeningTests::set_items(std::vector<eval::PreferenceItem> items) {
  std::lock_guard lock(mu_);
  preference_ = std::move(items);
  for (const auto& it : preference_) {
    media_url(it.audio_baseline);
    media_url(it.audio_neutral);
    media_url(it.audio_other);
  }
}

void ListeningTests::set_items(std::vector<eval::QueryMatchItem> items) {
  std::lock_guard lock(mu_);
  query_ = std::move(items);
  for (const auto& it : query_) {
    media_url(it.audio_query);
    media_url(it.audio_response);
  }
}

std::size_t ListeningTests::item_count(TestKind k) const {
  std::lock_guard lock(mu_);
  return item_ids(k).size();
}

std::vector<std::string> ListeningTests::item_ids(TestKind k) const {
  std::vector<std::string> ids;
  switch (k) {
    case TestKind::kAbx:
      for (const auto& it : abx_) ids.push_back(it.id);
      break;
    case TestKind::kPreference:
      for (const auto& it : preference_) ids.push_back(it.id);
      break;
    case TestKind::kQueryMatch:
      for (const auto& it : query_) ids.push_back(it.id);
      break;
  }
  return ids;
}

std::string ListeningTests::create_session(TestKind k) {
  std::lock_guard lock(mu_);
  if (item_ids(k).empty()) throw HttpError(503, "no " + std::string(test_kind_name(k)) + " items are configured");
  Session s{new_session_id(), k, 0, now_iso()};
  session_index_->append({s.id, std::string(test_kind_name(k)), "", "", s.created_at});
  sessions_[s.id] = s;
  return s.id;
}

std::string ListeningTests::next(TestKind k, const std::string& session_id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.kind != k) throw HttpError(404, "unknown session");
  const Session& s = it->second;
  const auto ids = item_ids(k);
  if (s.cursor >= ids.size()) throw HttpError(410, "session complete");
  json out{{"session_id", s.id}, {"item_id", ids[s.cursor]}, {"index", s.cursor}, {"total", ids.size()}};
  json stimuli = json::array();
  switch (k) {
    case TestKind::kAbx: {
      const auto& item = abx_[s.cursor];
      stimuli.push_back({{"label", "A"}, {"url", media_url(item.audio_a)}});
      stimuli.push_back({{"label", "B"}, {"url", media_url(item.audio_b)}});
      stimuli.push_back({{"label", "X"}, {"url", media_url(item.audio_x)}});
      out["choices"] = {"A", "B"};
      break;
    }
    case TestKind::kPreference: {
      const auto& item = preference_[s.cursor];
      const std::array<const std::string*, 3> refs{&item.audio_baseline, &item.audio_neutral, &item.audio_other};
      const auto order = option_order(s.id, item.id);
      for (int i = 0; i < 3; ++i) {
        stimuli.push_back({{"label", std::to_string(i + 1)},
                           {"url", media_url(*refs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])])}});
      }
      out["text"] = item.text;
      out["choices"] = {"1", "2", "3"};
      break;
    }
    case TestKind::kQueryMatch: {
      const auto& item = query_[s.cursor];
      stimuli.push_back({{"label", "query"}, {"url", media_url(item.audio_query)}});
      stimuli.push_back({{"label", "response"}, {"url", media_url(item.audio_response)}});
      out["choices"] = {"good", "bad"};
      break;
    }
  }
  out["stimuli"] = stimuli;
  return out.dump();
}

void ListeningTests::answer(TestKind k, const std::string& session_id, const std::string& item_id,
                            const std::string& choice) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end() || it->second.kind != k) throw HttpError(404, "unknown session");
  Session& s = it->second;
  const auto ids = item_ids(k);
  const auto pos = std::find(ids.begin(), ids.end(), item_id);
  if (pos == ids.end()) throw HttpError(404, "unknown item");
  const auto index = static_cast<std::size_t>(pos - ids.begin());
  if (index < s.cursor) throw HttpError(409, "item already answered");
  if (s.cursor >= ids.size()) throw HttpError(410, "session complete");
  if (index > s.cursor) throw HttpError(409, "item is not the current one");

  std::string canonical;
  switch (k) {
    case TestKind::kAbx:
      if (choice != "A" && choice != "B") throw HttpError(400, "choice must be A or B");
      canonical = choice;
      break;
    case TestKind::kPreference: {
      if (choice != "1" && choice != "2" && choice != "3") throw HttpError(400, "choice must be 1, 2 or 3");
      const auto order = option_order(s.id, item_id);
      const int cond = order[static_cast<std::size_t>(choice[0] - '1')];
      canonical = eval::preference_choice_name(static_cast<eval::PreferenceChoice>(cond));
      break;
    }
    case TestKind::kQueryMatch:
      if (choice != "good" && choice != "bad") throw HttpError(400, "choice must be good or bad");
      canonical = choice;
      break;
  }
  eval::LoggedAnswer a{s.id, std::string(test_kind_name(k)), item_id, canonical, now_iso()};
  log_->append(a);
  answers_.push_back(std::move(a));
  ++s.cursor;
}

std::string ListeningTests::results(TestKind k) const {
  std::lock_guard lock(mu_);
  json out{{"kind", test_kind_name(k)}};
  switch (k) {
    case TestKind::kAbx: {
      const auto answers = eval::abx_answers(answers_);
      const auto s = eval::score_abx(answers, abx_);
      out["total"] = s.total;
      out["matches"] = s.matches;
      out["accuracy"] = s.accuracy;
      json pairs = json::array();
      for (int i = 0; i < kNumStyles; ++i) {
        for (int j = i + 1; j < kNumStyles; ++j) {
          const auto& c = s.per_pair[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          if (c.total == 0) continue;
          pairs.push_back({{"style_1", style_name(style_from_index(i))},
                           {"style_2", style_name(style_from_index(j))},
                           {"matches", c.matches},
                           {"total", c.total}});
        }
      }
      out["per_pair"] = pairs;
      break;
    }
    case TestKind::kPreference: {
      const auto answers = eval::preference_answers(answers_);
      out["total"] = answers.size();
      if (!answers.empty()) {
        const auto s = eval::score_preference(answers);
        for (int i = 0; i < eval::kNumPreferenceChoices; ++i) {
          const auto name = std::string(eval::preference_choice_name(static_cast<eval::PreferenceChoice>(i)));
          out["counts"][name] = s.counts[static_cast<std::size_t>(i)];
          out["percent"][name] = s.percent[static_cast<std::size_t>(i)];
        }
      }
      break;
    }
    case TestKind::kQueryMatch: {
      const auto answers = eval::query_answers(answers_);
      out["total"] = answers.size();
      if (!answers.empty()) {
        const auto s = eval::score_query_match(answers);
        out["good"] = s.good;
        out["match_rate"] = s.rate;
      }
      break;
    }
  }
  return out.dump();
}

std::optional<std::filesystem::path> ListeningTests::media_path(const std::string& name) const {
  std::lock_guard lock(mu_);
  const auto it = media_.find(name);
  if (it == media_.end()) return std::nullopt;
  return it->second;
}

std::size_t ListeningTests::logged_answers() const {
  std::lock_guard lock(mu_);
  return answers_.size();
}

pipeline::SynthesisRequest parse_synthesize_body(std::string_view body,
                                                 const std::map<std::string, pipeline::QueryRef>& queries) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw HttpError(400, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw HttpError(400, "body must be a JSON object");
  pipeline::SynthesisRequest req;
  if (!j.contains("text") || !j["text"].is_string()) throw HttpError(422, "text is required");
  req.text = j["text"].get<std::string>();
  if (req.text.find_first_not_of(" \t\r\n") == std::string::npos) throw HttpError(422, "text is empty");
  if (j.contains("speaker")) {
    if (!j["speaker"].is_string()) throw HttpError(400, "speaker must be a string");
    req.speaker = j["speaker"].get<std::string>();
  }
  if (!j.contains("style") || !j["style"].is_object()) throw HttpError(400, "style object is required");
  const auto& st = j["style"];
  for (const auto& [key, value] : st.items()) {
    if (key == "named") {
      if (!value.is_string()) throw HttpError(400, "style.named must be a string");
      req.named_style = value.get<std::string>();
    } else if (key == "embedding") {
      if (!value.is_array() || value.size() != kNumStyles) throw HttpError(400, "style.embedding must have 6 numbers");
      StyleEmbedding e;
      for (int i = 0; i < kNumStyles; ++i) {
        if (!value[static_cast<std::size_t>(i)].is_number()) throw HttpError(400, "style.embedding must be numeric");
        e.p[static_cast<std::size_t>(i)] = value[static_cast<std::size_t>(i)].get<double>();
      }
      if (!on_simplex(e)) throw HttpError(400, "style.embedding is not a probability vector");
      req.embedding = e;
    } else if (key == "query_id") {
      if (!value.is_string()) throw HttpError(400, "style.query_id must be a string");
      const auto it = queries.find(value.get<std::string>());
      if (it == queries.end()) throw HttpError(400, "unknown query_id");
      req.query = it->second;
    } else {
      throw HttpError(400, "unknown style field \"" + key + "\"");
    }
  }
  try {
    req.validate();
  } catch (const Error& e) {
    throw HttpError(400, e.what());
  }
  if (req.named_style && !parse_style(*req.named_style)) {
    throw HttpError(400, "unknown style \"" + *req.named_style + "\"");
  }
  return req;
}

struct Server::Impl {
  ServiceConfig cfg;
  std::shared_ptr<pipeline::ModelRegistry> models;
  ListeningTests tests;
  std::map<std::string, pipeline::QueryRef> queries;
  httplib::Server http;
  int port = -1;

  Impl(ServiceConfig c, std::shared_ptr<pipeline::ModelRegistry> m)
      : cfg(std::move(c)), models(std::move(m)), tests(cfg.state_dir) {
    const auto qpath = cfg.state_dir / "queries.jsonl";
    if (std::filesystem::exists(qpath)) {
      std::ifstream in(qpath);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        std::filesystem::path audio = j.at("audio").get<std::string>();
        if (audio.is_relative()) audio = cfg.state_dir / audio;
        queries[j.at("id").get<std::string>()] = {audio, j.value("transcript", ""), std::nullopt};
      }
    }
    routes();
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  }

  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const HttpError& e) {
      send_error(res, e.status(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  void routes() {
    http.Post("/api/synthesize", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto bundle = models ? models->get() : nullptr;
        if (!bundle) throw HttpError(503, "models are not loaded");
        const auto request = parse_synthesize_body(req.body, queries);
        StyleEmbedding e;
        try {
          e = pipeline::resolve_style(request, *bundle);
        } catch (const Error& ex) {
          throw HttpError(400, ex.what());
        }
        const auto out = pipeline::synthesize_with(request.text, e, request.speaker, *bundle);
        const auto bytes = encode_wav(out.audio);
        json emb = json::array();
        for (double v : e.p) emb.push_back(v);
        res.set_header("X-Style-Embedding", emb.dump());
        res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
      });
    });
    http.Get(R"(/api/test/([a-z_]+)/session)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto kind = parse_test_kind(req.matches[1].str());
        if (!kind) throw HttpError(404, "unknown test kind");
        const auto id = tests.create_session(*kind);
        res.set_content(json{{"session_id", id}, {"total", tests.item_count(*kind)}}.dump(), "application/json");
      });
    });
    http.Get(R"(/api/test/([a-z_]+)/([0-9a-f]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto kind = parse_test_kind(req.matches[1].str());
        if (!kind) throw HttpError(404, "unknown test kind");
        res.set_content(tests.next(*kind, req.matches[2].str()), "application/json");
      });
    });
    http.Post(R"(/api/test/([a-z_]+)/([0-9a-f]+)/answer)",
              [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                  const auto kind = parse_test_kind(req.matches[1].str());
                  if (!kind) throw HttpError(404, "unknown test kind");
                  json j;
                  try {
                    j = json::parse(req.body);
                  } catch (const json::exception& e) {
                    throw HttpError(400, std::string("invalid JSON: ") + e.what());
                  }
                  if (!j.is_object() || !j.contains("item_id") || !j.contains("choice") ||
                      !j["item_id"].is_string() || !j["choice"].is_string()) {
                    throw HttpError(400, "body needs item_id and choice strings");
                  }
                  tests.answer(*kind, req.matches[2].str(), j["item_id"].get<std::string>(),
                               j["choice"].get<std::string>());
                  res.set_content(json{{"accepted", true}}.dump(), "application/json");
                });
              });
    http.Get(R"(/api/results/([a-z_]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto kind = parse_test_kind(req.matches[1].str());
        if (!kind) throw HttpError(404, "unknown test kind");
        res.set_content(tests.results(*kind), "application/json");
      });
    });
    http.Post("/api/admin/reload", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        reload();
        res.set_content(json{{"reloaded", true}}.dump(), "application/json");
      });
    });
    http.Get(R"(/media/([0-9a-f]+)\.wav)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto path = tests.media_path(req.matches[1].str());
        if (!path) throw HttpError(404, "unknown media");
        std::ifstream in(*path, std::ios::binary);
        if (!in) throw HttpError(404, "media file missing");
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        res.set_content(data, "audio/wav");
      });
    });
  }

  void reload() {
    if (cfg.model_dir.empty()) throw HttpError(503, "no model directory configured");
    if (!models) models = std::make_shared<pipeline::ModelRegistry>();
    auto bundle = std::make_shared<pipeline::ModelBundle>(
        pipeline::load_bundle(cfg.model_dir, pipeline::parse_vocoder(cfg.vocoder)));
    models->swap(std::move(bundle));
  }
};

Server::Server(ServiceConfig cfg, std::shared_ptr<pipeline::ModelRegistry> models)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(models))) {}

Server::~Server() { stop(); }

ListeningTests& Server::tests() { return impl_->tests; }

int Server::bind() {
  if (impl_->cfg.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(impl_->cfg.host);
  } else {
    impl_->port = impl_->http.bind_to_port(impl_->cfg.host, impl_->cfg.port) ? impl_->cfg.port : -1;
  }
  if (impl_->port < 0) throw Error("cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
  return impl_->port;
}

void Server::run() {
  if (impl_->port < 0) bind();
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

void Server::reload_models() { impl_->reload(); }

}  // namespace styletts::service
