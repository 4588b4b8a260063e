#ifndef STYLETTS_EVALKIT_HPP_
#define STYLETTS_EVALKIT_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "styletts/audio.hpp"
#include "styletts/style.hpp"

namespace styletts::eval {

enum class AbxChoice { kA, kB };
std::string_view abx_choice_name(AbxChoice c);
AbxChoice parse_abx_choice(std::string_view s);

struct AbxItem {
  std::string id;
  StyleLabel style_a = StyleLabel::kNeutral;
  StyleLabel style_b = StyleLabel::kHappy;
  StyleLabel ref_style = StyleLabel::kNeutral;
  std::string audio_a, audio_b, audio_x;
  AbxChoice correct = AbxChoice::kA;
};

// Sample refs per style, e.g. synthesized WAV paths.
using AbxPool = std::map<StyleLabel, std::vector<std::string>>;

// One item per unordered pair of `styles`, in canonical pair order. The
// reference style is drawn uniformly from the pair and X is a different
// sample of that style than the one placed in A or B.
std::vector<AbxItem> build_abx(const std::vector<StyleLabel>& styles, const AbxPool& pool, std::uint64_t seed);

struct AbxAnswer {
  std::string session_id;
  std::string item_id;
  AbxChoice choice = AbxChoice::kA;
  std::string timestamp;
};

struct PairScore {
  long matches = 0;
  long total = 0;
};

struct AbxScore {
  long matches = 0;
  long total = 0;
  double accuracy = 0.0;  // percent
  // Indexed by canonical style index, [min][max] of the pair.
  std::array<std::array<PairScore, kNumStyles>, kNumStyles> per_pair{};
};

AbxScore score_abx(const std::vector<AbxAnswer>& answers, const std::vector<AbxItem>& items);

enum class PreferenceChoice { kBaseline = 0, kMultiStyleNeutral = 1, kMultiStyleOther = 2 };
inline constexpr int kNumPreferenceChoices = 3;
std::string_view preference_choice_name(PreferenceChoice c);
PreferenceChoice parse_preference_choice(std::string_view s);

struct PreferenceItem {
  std::string id;
  std::string text;
  std::string audio_baseline, audio_neutral, audio_other;
};

struct PreferenceAnswer {
  std::string session_id;
  std::string item_id;
  PreferenceChoice choice = PreferenceChoice::kBaseline;
  std::string timestamp;
};

struct PreferenceScore {
  std::array<long, kNumPreferenceChoices> counts{};
  std::array<double, kNumPreferenceChoices> percent{};
  long total = 0;
};

PreferenceScore score_preference(const std::vector<PreferenceAnswer>& answers);
PreferenceScore score_preference_counts(const std::array<long, kNumPreferenceChoices>& counts);

struct QueryMatchItem {
  std::string id;
  std::string audio_query, audio_response;
};

struct QueryMatchAnswer {
  std::string session_id;
  std::string item_id;
  bool good = false;
  std::string timestamp;
};

struct QueryMatchScore {
  long good = 0;
  long total = 0;
  double rate = 0.0;  // percent
};

QueryMatchScore score_query_match(const std::vector<bool>& judgments);
QueryMatchScore score_query_match(const std::vector<QueryMatchAnswer>& answers);

struct F0Row {
  bool present = false;
  double mean = 0.0;  // Hz, mean of per-utterance voiced means
  double std = 0.0;   // population std of the same
  int count = 0;      // utterances with voiced frames
};

using F0StatsTable = std::array<F0Row, kNumStyles>;

F0StatsTable f0_statistics(const std::map<StyleLabel, std::vector<Waveform>>& groups);

std::string format_f0_table(const F0StatsTable& t);
std::string f0_table_csv(const F0StatsTable& t);
std::string format_preference(const PreferenceScore& s);
std::string preference_csv(const PreferenceScore& s);
std::string format_abx(const AbxScore& s);
std::string abx_csv(const AbxScore& s);

// JSON-lines persistence of item lists.
void write_abx_items(const std::filesystem::path& path, const std::vector<AbxItem>& items);
std::vector<AbxItem> read_abx_items(const std::filesystem::path& path);
void write_preference_items(const std::filesystem::path& path, const std::vector<PreferenceItem>& items);
std::vector<PreferenceItem> read_preference_items(const std::filesystem::path& path);
void write_query_items(const std::filesystem::path& path, const std::vector<QueryMatchItem>& items);
std::vector<QueryMatchItem> read_query_items(const std::filesystem::path& path);

// One answer-log line: {"session_id", "kind", "item_id", "choice", "timestamp"}.
struct LoggedAnswer {
  std::string session_id;
  std::string kind;
  std::string item_id;
  std::string choice;
  std::string timestamp;
};

std::string to_jsonl(const LoggedAnswer& a);
LoggedAnswer parse_logged_answer(std::string_view line);
std::vector<LoggedAnswer> read_answer_log(const std::filesystem::path& path);

std::vector<AbxAnswer> abx_answers(const std::vector<LoggedAnswer>& log);
std::vector<PreferenceAnswer> preference_answers(const std::vector<LoggedAnswer>& log);
std::vector<QueryMatchAnswer> query_answers(const std::vector<LoggedAnswer>& log);

}  // namespace styletts::eval

#endif  // STYLETTS_EVALKIT_HPP_
