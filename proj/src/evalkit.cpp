#include "styletts/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "styletts/error.hpp"
#include "styletts/pitch.hpp"

namespace styletts::eval {

using nlohmann::json;

std::string_view abx_choice_name(AbxChoice c) { return c == AbxChoice::kA ? "A" : "B"; }

AbxChoice parse_abx_choice(std::string_view s) {
  if (s == "A") return AbxChoice::kA;
  if (s == "B") return AbxChoice::kB;
  throw ParseError("ABX choice must be A or B, got \"" + std::string(s) + "\"");
}

std::vector<AbxItem> build_abx(const std::vector<StyleLabel>& styles, const AbxPool& pool, std::uint64_t seed) {
  std::vector<StyleLabel> sorted(styles);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw Error("build_abx: duplicate style");
  if (sorted.size() < 2) throw Error("build_abx: need at least two styles");
  for (StyleLabel s : sorted) {
    const auto it = pool.find(s);
    if (it == pool.end() || it->second.size() < 2) {
      throw Error("build_abx: style " + std::string(style_name(s)) + " has fewer than two samples");
    }
  }
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<AbxItem> items;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      AbxItem item;
      // Ids reach listeners, so they must not name the styles.
      char id[16];
      std::snprintf(id, sizeof id, "abx_%02zu", items.size() + 1);
      item.id = id;
      // Presentation order of the two styles is randomized.
      const bool flip = pick(2) == 1;
      item.style_a = flip ? sorted[j] : sorted[i];
      item.style_b = flip ? sorted[i] : sorted[j];
      const auto& pa = pool.at(item.style_a);
      const auto& pb = pool.at(item.style_b);
      const std::size_t ia = pick(pa.size());
      const std::size_t ib = pick(pb.size());
      item.audio_a = pa[ia];
      item.audio_b = pb[ib];
      const bool ref_is_a = pick(2) == 0;
      item.ref_style = ref_is_a ? item.style_a : item.style_b;
      item.correct = ref_is_a ? AbxChoice::kA : AbxChoice::kB;
      const auto& pr = ref_is_a ? pa : pb;
      const std::size_t used = ref_is_a ? ia : ib;
      std::size_t ix = pick(pr.size() - 1);
      if (ix >= used) ++ix;
      item.audio_x = pr[ix];
      items.push_back(std::move(item));
    }
  }
  return items;
}

AbxScore score_abx(const std::vector<AbxAnswer>& answers, const std::vector<AbxItem>& items) {
  std::unordered_map<std::string, const AbxItem*> by_id;
  for (const auto& it : items) by_id[it.id] = &it;
  AbxScore s;
  for (const auto& a : answers) {
    const auto it = by_id.find(a.item_id);
    if (it == by_id.end()) throw Error("answer references unknown item \"" + a.item_id + "\"");
    const AbxItem& item = *it->second;
    const bool match = a.choice == item.correct;
    const int lo = std::min(style_index(item.style_a), style_index(item.style_b));
    const int hi = std::max(style_index(item.style_a), style_index(item.style_b));
    auto& cell = s.per_pair[static_cast<std::size_t>(lo)][static_cast<std::size_t>(hi)];
    ++cell.total;
    ++s.total;
    if (match) {
      ++cell.matches;
      ++s.matches;
    }
  }
  s.accuracy = s.total > 0 ? 100.0 * static_cast<double>(s.matches) / static_cast<double>(s.total) : 0.0;
  return s;
}

std::string_view preference_choice_name(PreferenceChoice c) {
  switch (c) {
    case PreferenceChoice::kBaseline:
      return "baseline";
    case PreferenceChoice::kMultiStyleNeutral:
      return "multi_style_neutral";
    case PreferenceChoice::kMultiStyleOther:
      return "multi_style_other";
  }
  return "baseline";
}

PreferenceChoice parse_preference_choice(std::string_view s) {
  for (int i = 0; i < kNumPreferenceChoices; ++i) {
    const auto c = static_cast<PreferenceChoice>(i);
    if (preference_choice_name(c) == s) return c;
  }
  throw ParseError("unknown preference choice \"" + std::string(s) + "\"");
}

PreferenceScore score_preference_counts(const std::array<long, kNumPreferenceChoices>& counts) {
  PreferenceScore s;
  s.counts = counts;
  for (long c : counts) {
    if (c < 0) throw Error("negative preference count");
    s.total += c;
  }
  if (s.total == 0) throw Error("score_preference: no answers");
  for (int i = 0; i < kNumPreferenceChoices; ++i) {
    s.percent[static_cast<std::size_t>(i)] =
        100.0 * static_cast<double>(counts[static_cast<std::size_t>(i)]) / static_cast<double>(s.total);
  }
  return s;
}

PreferenceScore score_preference(const std::vector<PreferenceAnswer>& answers) {
  std::array<long, kNumPreferenceChoices> counts{};
  for (const auto& a : answers) ++counts[static_cast<std::size_t>(a.choice)];
  return score_preference_counts(counts);
}

QueryMatchScore score_query_match(const std::vector<bool>& judgments) {
  if (judgments.empty()) throw Error("score_query_match: no judgments");
  QueryMatchScore s;
  s.total = static_cast<long>(judgments.size());
  s.good = std::count(judgments.begin(), judgments.end(), true);
  s.rate = 100.0 * static_cast<double>(s.good) / static_cast<double>(s.total);
  return s;
}

QueryMatchScore score_query_match(const std::vector<QueryMatchAnswer>& answers) {
  std::vector<bool> j;
  for (const auto& a : answers) j.push_back(a.good);
  return score_query_match(j);
}

F0StatsTable f0_statistics(const std::map<StyleLabel, std::vector<Waveform>>& groups) {
  F0StatsTable t{};
  for (const auto& [style, waves] : groups) {
    if (waves.empty()) throw Error("f0_statistics: empty group for " + std::string(style_name(style)));
    std::vector<double> means;
    for (const auto& w : waves) {
      const double m = tts::mean_voiced_f0(tts::estimate_f0(w));
      if (m > 0.0) means.push_back(m);
    }
    F0Row& row = t[static_cast<std::size_t>(style_index(style))];
    if (means.empty()) continue;
    row.present = true;
    row.count = static_cast<int>(means.size());
    for (double m : means) row.mean += m;
    row.mean /= static_cast<double>(means.size());
    for (double m : means) row.std += (m - row.mean) * (m - row.mean);
    row.std = std::sqrt(row.std / static_cast<double>(means.size()));
  }
  return t;
}

std::string format_f0_table(const F0StatsTable& t) {
  std::ostringstream o;
  o << std::left << std::setw(10) << "Style" << std::right << std::setw(10) << "Mean Hz" << std::setw(10) << "Std Hz"
    << std::setw(8) << "N" << '\n';
  o << std::fixed << std::setprecision(1);
  for (int i = 0; i < kNumStyles; ++i) {
    const auto& r = t[static_cast<std::size_t>(i)];
    o << std::left << std::setw(10) << style_name(style_from_index(i)) << std::right;
    if (r.present) {
      o << std::setw(10) << r.mean << std::setw(10) << r.std << std::setw(8) << r.count << '\n';
    } else {
      o << std::setw(10) << "--" << std::setw(10) << "--" << std::setw(8) << 0 << '\n';
    }
  }
  return o.str();
}

std::string f0_table_csv(const F0StatsTable& t) {
  std::ostringstream o;
  o << "style,mean_hz,std_hz,count\n";
  o << std::setprecision(10);
  for (int i = 0; i < kNumStyles; ++i) {
    const auto& r = t[static_cast<std::size_t>(i)];
    if (!r.present) continue;
    o << style_name(style_from_index(i)) << ',' << r.mean << ',' << r.std << ',' << r.count << '\n';
  }
  return o.str();
}

std::string format_preference(const PreferenceScore& s) {
  std::ostringstream o;
  o << std::left << std::setw(22) << "Baseline" << std::setw(22) << "Multi-style neutral" << "Multi-style other\n";
  for (int i = 0; i < kNumPreferenceChoices; ++i) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(1) << s.percent[static_cast<std::size_t>(i)] << "%";
    o << std::setw(22) << cell.str();
  }
  o << "\nanswers: " << s.total << '\n';
  return o.str();
}

std::string preference_csv(const PreferenceScore& s) {
  std::ostringstream o;
  o << "choice,count,percent\n" << std::setprecision(10);
  for (int i = 0; i < kNumPreferenceChoices; ++i) {
    o << preference_choice_name(static_cast<PreferenceChoice>(i)) << ',' << s.counts[static_cast<std::size_t>(i)]
      << ',' << s.percent[static_cast<std::size_t>(i)] << '\n';
  }
  return o.str();
}

std::string format_abx(const AbxScore& s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "ABX accuracy: " << s.accuracy << "% (" << s.matches << " of " << s.total << ")\n";
  for (int i = 0; i < kNumStyles; ++i) {
    for (int j = i + 1; j < kNumStyles; ++j) {
      const auto& c = s.per_pair[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (c.total == 0) continue;
      o << "  " << style_name(style_from_index(i)) << " vs " << style_name(style_from_index(j)) << ": "
        << 100.0 * static_cast<double>(c.matches) / static_cast<double>(c.total) << "% (" << c.matches << "/"
        << c.total << ")\n";
    }
  }
  return o.str();
}

std::string abx_csv(const AbxScore& s) {
  std::ostringstream o;
  o << "style_1,style_2,matches,total\n";
  for (int i = 0; i < kNumStyles; ++i) {
    for (int j = i + 1; j < kNumStyles; ++j) {
      const auto& c = s.per_pair[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (c.total == 0) continue;
      o << style_name(style_from_index(i)) << ',' << style_name(style_from_index(j)) << ',' << c.matches << ','
        << c.total << '\n';
    }
  }
  o << "all,all," << s.matches << ',' << s.total << '\n';
  return o.str();
}

namespace {

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

StyleLabel style_field(const json& j, const char* key) {
  const auto s = parse_style(j.at(key).get<std::string>());
  if (!s) throw ParseError(std::string("bad style in field ") + key);
  return *s;
}

}  // namespace

void write_abx_items(const std::filesystem::path& path, const std::vector<AbxItem>& items) {
  std::vector<json> rows;
  for (const auto& it : items) {
    rows.push_back({{"id", it.id},
                    {"style_a", style_name(it.style_a)},
                    {"style_b", style_name(it.style_b)},
                    {"ref_style", style_name(it.ref_style)},
                    {"audio_a", it.audio_a},
                    {"audio_b", it.audio_b},
                    {"audio_x", it.audio_x},
                    {"correct", abx_choice_name(it.correct)}});
  }
  write_jsonl(path, rows);
}

std::vector<AbxItem> read_abx_items(const std::filesystem::path& path) {
  std::vector<AbxItem> out;
  for (const auto& j : read_jsonl(path)) {
    AbxItem it;
    it.id = j.at("id").get<std::string>();
    it.style_a = style_field(j, "style_a");
    it.style_b = style_field(j, "style_b");
    it.ref_style = style_field(j, "ref_style");
    it.audio_a = j.at("audio_a").get<std::string>();
    it.audio_b = j.at("audio_b").get<std::string>();
    it.audio_x = j.at("audio_x").get<std::string>();
    it.correct = parse_abx_choice(j.at("correct").get<std::string>());
    if ((it.correct == AbxChoice::kA) != (it.ref_style == it.style_a)) {
      throw ParseError("ABX item " + it.id + ": correct answer disagrees with ref_style");
    }
    out.push_back(std::move(it));
  }
  return out;
}

void write_preference_items(const std::filesystem::path& path, const std::vector<PreferenceItem>& items) {
  std::vector<json> rows;
  for (const auto& it : items) {
    rows.push_back({{"id", it.id},
                    {"text", it.text},
                    {"audio_baseline", it.audio_baseline},
                    {"audio_neutral", it.audio_neutral},
                    {"audio_other", it.audio_other}});
  }
  write_jsonl(path, rows);
}

std::vector<PreferenceItem> read_preference_items(const std::filesystem::path& path) {
  std::vector<PreferenceItem> out;
  for (const auto& j : read_jsonl(path)) {
    out.push_back({j.at("id").get<std::string>(), j.value("text", ""), j.at("audio_baseline").get<std::string>(),
                   j.at("audio_neutral").get<std::string>(), j.at("audio_other").get<std::string>()});
  }
  return out;
}

void write_query_items(const std::filesystem::path& path, const std::vector<QueryMatchItem>& items) {
  std::vector<json> rows;
  for (const auto& it : items) {
    rows.push_back({{"id", it.id}, {"audio_query", it.audio_query}, {"audio_response", it.audio_response}});
  }
  write_jsonl(path, rows);
}

std::vector<QueryMatchItem> read_query_items(const std::filesystem::path& path) {
  std::vector<QueryMatchItem> out;
  for (const auto& j : read_jsonl(path)) {
    out.push_back({j.at("id").get<std::string>(), j.at("audio_query").get<std::string>(),
                   j.at("audio_response").get<std::string>()});
  }
  return out;
}

std::string to_jsonl(const LoggedAnswer& a) {
  return json{{"session_id", a.session_id},
              {"kind", a.kind},
              {"item_id", a.item_id},
              {"choice", a.choice},
              {"timestamp", a.timestamp}}
      .dump();
}

LoggedAnswer parse_logged_answer(std::string_view line) {
  const auto j = json::parse(line);
  return {j.at("session_id").get<std::string>(), j.at("kind").get<std::string>(), j.at("item_id").get<std::string>(),
          j.at("choice").get<std::string>(), j.value("timestamp", "")};
}

std::vector<LoggedAnswer> read_answer_log(const std::filesystem::path& path) {
  std::vector<LoggedAnswer> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse_logged_answer(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AbxAnswer> abx_answers(const std::vector<LoggedAnswer>& log) {
  std::vector<AbxAnswer> out;
  for (const auto& a : log) {
    if (a.kind == "abx") out.push_back({a.session_id, a.item_id, parse_abx_choice(a.choice), a.timestamp});
  }
  return out;
}

std::vector<PreferenceAnswer> preference_answers(const std::vector<LoggedAnswer>& log) {
  std::vector<PreferenceAnswer> out;
  for (const auto& a : log) {
    if (a.kind == "preference") {
      out.push_back({a.session_id, a.item_id, parse_preference_choice(a.choice), a.timestamp});
    }
  }
  return out;
}

std::vector<QueryMatchAnswer> query_answers(const std::vector<LoggedAnswer>& log) {
  std::vector<QueryMatchAnswer> out;
  for (const auto& a : log) {
    if (a.kind != "query_match") continue;
    if (a.choice != "good" && a.choice != "bad") throw ParseError("query-match choice must be good or bad");
    out.push_back({a.session_id, a.item_id, a.choice == "good", a.timestamp});
  }
  return out;
}

}  // namespace styletts::eval
