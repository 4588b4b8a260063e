#include "styletts/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "styletts/error.hpp"

namespace styletts::corpus {

using nlohmann::json;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

std::vector<const Utterance*> Corpus::select(Split s) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances) {
    if (u.split == s) out.push_back(&u);
  }
  return out;
}

Corpus Corpus::subset(Split s) const {
  Corpus out;
  out.base_dir = base_dir;
  for (const auto& u : utterances) {
    if (u.split == s) out.utterances.push_back(u);
  }
  return out;
}

CountTable count_labels(const Corpus& c) {
  CountTable t;
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) t[s].fill(0);
  for (const auto& u : c.utterances) {
    if (u.style_label) ++t[u.split][static_cast<std::size_t>(style_index(*u.style_label))];
  }
  return t;
}

std::string format_count_table(const CountTable& t) {
  std::ostringstream os;
  os << "split";
  for (StyleLabel s : kAllStyles) os << '\t' << style_name(s);
  os << "\n";
  std::array<int, kNumStyles> all{};
  for (const auto& [split, counts] : t) {
    os << split_name(split);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      os << '\t' << counts[i];
      all[i] += counts[i];
    }
    os << "\n";
  }
  os << "all";
  for (int v : all) os << '\t' << v;
  os << "\n";
  return os.str();
}

std::optional<StyleLabel> map_label(std::string_view raw, CorpusKind kind) {
  std::string s(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if (kind == CorpusKind::kTts) return parse_style(s);
  if (s == "excited" || s == "exc" || s == "happy" || s == "hap") return StyleLabel::kHappy;
  if (s == "neutral" || s == "neu") return StyleLabel::kNeutral;
  if (s == "sad") return StyleLabel::kSad;
  if (s == "angry" || s == "ang") return StyleLabel::kAngry;
  return std::nullopt;
}

namespace {

std::string required_string(const json& j, const char* field, std::size_t line_no) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": missing field \"" + field + "\"");
  }
  if (!it->is_string()) {
    throw ParseError("manifest line " + std::to_string(line_no) + ": field \"" + field + "\" must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus parse_manifest(std::string_view content, CorpusKind kind, const std::filesystem::path& base_dir) {
  Corpus c;
  c.base_dir = base_dir;
  std::set<std::string> ids;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": invalid JSON");
    }
    if (!j.is_object()) throw ParseError("manifest line " + std::to_string(line_no) + ": expected an object");
    Utterance u;
    u.id = required_string(j, "id", line_no);
    u.audio_ref = required_string(j, "audio", line_no);
    u.text = required_string(j, "text", line_no);
    u.speaker_id = required_string(j, "speaker", line_no);
    u.corpus_id = required_string(j, "corpus", line_no);
    const std::string split = required_string(j, "split", line_no);
    auto sp = parse_split(split);
    if (!sp) throw ParseError("manifest line " + std::to_string(line_no) + ": unknown split \"" + split + "\"");
    u.split = *sp;
    if (auto it = j.find("style"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError("manifest line " + std::to_string(line_no) + ": style must be a string");
      u.style_label = map_label(it->get<std::string>(), kind);
    }
    if (!ids.insert(u.id).second) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": duplicate id \"" + u.id + "\"");
    }
    c.utterances.push_back(std::move(u));
  }
  return c;
}

Corpus load_manifest(const std::filesystem::path& path, CorpusKind kind) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), kind, path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const Corpus& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path.string());
  for (const auto& u : c.utterances) {
    json j = {{"id", u.id},           {"audio", u.audio_ref.generic_string()},
              {"text", u.text},       {"speaker", u.speaker_id},
              {"split", std::string(split_name(u.split))}, {"corpus", u.corpus_id}};
    if (u.style_label) j["style"] = std::string(style_name(*u.style_label));
    out << j.dump() << "\n";
  }
}

Waveform load_audio(const Corpus& c, const Utterance& u, int rate) {
  if (u.audio) {
    if (rate > 0 && u.audio->rate != rate) return resample(*u.audio, rate);
    return *u.audio;
  }
  std::filesystem::path p = u.audio_ref;
  if (p.is_relative() && !c.base_dir.empty()) p = c.base_dir / p;
  return read_wav(p, rate);
}

}  // namespace styletts::corpus
