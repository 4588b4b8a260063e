#ifndef STYLETTS_SERVICE_HPP_
#define STYLETTS_SERVICE_HPP_

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "styletts/error.hpp"
#include "styletts/evalkit.hpp"
#include "styletts/pipeline.hpp"

namespace styletts::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model_dir;  // bundle for /api/synthesize; may be empty
  std::filesystem::path state_dir = "state";  // item lists, logs, query table
  std::string vocoder = "dsp";

  // JSON file {"host", "port", "model_dir", "state_dir", "vocoder"}.
  static ServiceConfig from_file(const std::filesystem::path& path);
  // STYLETTS_HOST, STYLETTS_PORT, STYLETTS_MODEL_DIR, STYLETTS_STATE_DIR,
  // STYLETTS_VOCODER override file values.
  void apply_env();
};

enum class TestKind { kAbx, kPreference, kQueryMatch };
std::string_view test_kind_name(TestKind k);
std::optional<TestKind> parse_test_kind(std::string_view s);

// Error carrying the HTTP status it maps to.
class HttpError : public Error {
 public:
  HttpError(int status, const std::string& message) : Error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Appends one line per accepted answer; a single mutex serializes writers and
// every record goes out in one flushed write.
class AnswerLog {
 public:
  explicit AnswerLog(std::filesystem::path path);
  void append(const eval::LoggedAnswer& a);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::mutex mu_;
  std::filesystem::path path_;
  std::ofstream out_;
};

// Listening-test sessions over pre-built item lists. Thread-safe. Payloads
// handed to listeners never name styles or the expected answer.
class ListeningTests {
 public:
  // Reads abx_items.jsonl, preference_items.jsonl and query_items.jsonl from
  // state_dir when present, then replays sessions.jsonl and answers.jsonl.
  explicit ListeningTests(const std::filesystem::path& state_dir);

  std::size_t item_count(TestKind k) const;
  void set_items(std::vector<eval::AbxItem> items);
  void set_items(std::vector<eval::PreferenceItem> items);
  void set_items(std::vector<eval::QueryMatchItem> items);

  std::string create_session(TestKind k);
  // JSON text of the next unanswered item; 404 unknown session, 410 done.
  std::string next(TestKind k, const std::string& session_id);
  // 404 unknown session or item, 409 already answered or out of order,
  // 410 session complete, 400 invalid choice.
  void answer(TestKind k, const std::string& session_id, const std::string& item_id, const std::string& choice);
  // evalkit aggregates over the raw log, as JSON text.
  std::string results(TestKind k) const;

  // Opaque media name -> file path of a stimulus.
  std::optional<std::filesystem::path> media_path(const std::string& name) const;
  std::size_t logged_answers() const;

 private:
  struct Session {
    std::string id;
    TestKind kind = TestKind::kAbx;
    std::size_t cursor = 0;
    std::string created_at;
  };
  std::vector<std::string> item_ids(TestKind k) const;
  std::string media_url(const std::string& ref);
  std::string record_session(const Session& s);

  std::filesystem::path state_dir_;
  mutable std::mutex mu_;
  std::vector<eval::AbxItem> abx_;
  std::vector<eval::PreferenceItem> preference_;
  std::vector<eval::QueryMatchItem> query_;
  std::map<std::string, Session> sessions_;
  std::vector<eval::LoggedAnswer> answers_;
  std::map<std::string, std::filesystem::path> media_;
  std::unique_ptr<AnswerLog> log_;
  std::unique_ptr<AnswerLog> session_index_;
};

// Parses a /api/synthesize body into a request. Throws HttpError 400 for an
// invalid style source and 422 for empty text.
pipeline::SynthesisRequest parse_synthesize_body(std::string_view body,
                                                 const std::map<std::string, pipeline::QueryRef>& queries);

class Server {
 public:
  Server(ServiceConfig cfg, std::shared_ptr<pipeline::ModelRegistry> models);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ListeningTests& tests();
  // Binds (port 0 picks a free port) and returns the bound port.
  int bind();
  // Blocks until stop().
  void run();
  void stop();
  // Reloads the bundle from model_dir and swaps it in.
  void reload_models();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace styletts::service

#endif  // STYLETTS_SERVICE_HPP_
