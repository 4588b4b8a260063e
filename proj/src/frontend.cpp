#include "styletts/frontend.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "styletts/error.hpp"

namespace styletts::tts {

namespace {

constexpr const char* kArpabet[] = {"AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH",
                                    "EH", "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
                                    "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH",
                                    "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

bool is_punct_token(const std::string& t) {
  return t.size() == 1 && std::string_view(",.;:!?").find(t[0]) != std::string_view::npos;
}

}  // namespace

PhonemeInventory::PhonemeInventory() {
  for (const char* s : kArpabet) symbols_.emplace_back(s);
  pause_id_ = static_cast<int>(symbols_.size());
  symbols_.emplace_back("pau");
  for (char c = 'a'; c <= 'z'; ++c) symbols_.push_back(std::string("L_") + c);
  for (std::size_t i = 0; i < symbols_.size(); ++i) index_[symbols_[i]] = static_cast<int>(i);
}

const PhonemeInventory& PhonemeInventory::instance() {
  static const PhonemeInventory inv;
  return inv;
}

int PhonemeInventory::id(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw ParseError("unknown phoneme \"" + std::string(symbol) + "\"");
  return it->second;
}

bool PhonemeInventory::contains(std::string_view symbol) const { return index_.count(std::string(symbol)) > 0; }

int PhonemeInventory::letter_id(char c) const {
  const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower < 'a' || lower > 'z') return -1;
  return id(std::string("L_") + lower);
}

int linguistic_feature_dim() { return PhonemeInventory::instance().size() + kLinguisticExtras; }

Lexicon Lexicon::parse(std::string_view content) {
  Lexicon lex;
  const auto& inv = PhonemeInventory::instance();
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<std::string> phones;
    std::string ph;
    while (ls >> ph) {
      // Strip stress digits (AH0 -> AH).
      while (!ph.empty() && std::isdigit(static_cast<unsigned char>(ph.back()))) ph.pop_back();
      if (!inv.contains(ph)) {
        throw ParseError("lexicon line " + std::to_string(line_no) + ": unknown phoneme \"" + ph + "\"");
      }
      phones.push_back(ph);
    }
    if (phones.empty()) throw ParseError("lexicon line " + std::to_string(line_no) + ": no phonemes");
    for (auto& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    lex.entries_[word] = std::move(phones);
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read lexicon: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Lexicon Lexicon::shipped() { return load(std::filesystem::path(STYLETTS_DATA_DIR) / "lexicon.txt"); }

const std::vector<std::string>* Lexicon::lookup(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

std::string expand_number(int n) {
  static const char* kOnes[] = {"zero",    "one",     "two",       "three",    "four",
                                "five",    "six",     "seven",     "eight",    "nine",
                                "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  static const char* kTens[] = {"", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"};
  if (n < 0 || n > 9999) throw Error("expand_number: only 0-9999 supported");
  if (n < 20) return kOnes[n];
  std::string out;
  auto append = [&out](const std::string& w) {
    if (!out.empty()) out += ' ';
    out += w;
  };
  if (n >= 1000) {
    append(std::string(kOnes[n / 1000]) + " thousand");
    n %= 1000;
  }
  if (n >= 100) {
    append(std::string(kOnes[n / 100]) + " hundred");
    n %= 100;
  }
  if (n >= 20) {
    append(kTens[n / 10]);
    n %= 10;
    if (n > 0) append(kOnes[n]);
  } else if (n > 0) {
    append(kOnes[n]);
  }
  return out;
}

std::vector<std::string> normalize_text(std::string_view text) {
  std::vector<std::string> tokens;
  auto push_words = [&tokens](const std::string& words) {
    std::istringstream ws(words);
    std::string w;
    while (ws >> w) tokens.push_back(w);
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isdigit(c)) {
      std::size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      const std::string digits(text.substr(i, j - i));
      if (digits.size() <= 4) {
        push_words(expand_number(std::stoi(digits)));
      } else {
        for (char d : digits) push_words(expand_number(d - '0'));
      }
      i = j;
    } else if (std::isalpha(c) || c == '\'') {
      std::size_t j = i;
      std::string word;
      while (j < text.size() && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '\'')) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
        ++j;
      }
      while (!word.empty() && word.back() == '\'') word.pop_back();
      while (!word.empty() && word.front() == '\'') word.erase(word.begin());
      if (!word.empty()) tokens.push_back(word);
      i = j;
    } else {
      if (std::string_view(",.;:!?").find(static_cast<char>(c)) != std::string_view::npos) {
        tokens.emplace_back(1, static_cast<char>(c));
      }
      ++i;
    }
  }
  return tokens;
}

LinguisticSequence text_to_linguistic(std::string_view text, const Lexicon& lexicon) {
  const auto& inv = PhonemeInventory::instance();
  const auto tokens = normalize_text(text);
  LinguisticSequence seq;
  std::vector<double> pos_in_word;
  std::vector<bool> word_final;
  std::vector<bool> pause_after;
  int word = 0;
  bool seen_word = false;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::string& tok = tokens[t];
    if (is_punct_token(tok)) {
      if (seq.phonemes.empty()) continue;
      pause_after.back() = true;
      // A pause phoneme only between words.
      bool more_words = false;
      for (std::size_t k = t + 1; k < tokens.size(); ++k) {
        if (!is_punct_token(tokens[k])) {
          more_words = true;
          break;
        }
      }
      if (more_words && seq.phonemes.back() != inv.pause_id()) {
        seq.phonemes.push_back(inv.pause_id());
        seq.word_index.push_back(-1);
        pos_in_word.push_back(0.0);
        word_final.push_back(false);
        pause_after.push_back(false);
      }
      continue;
    }
    std::vector<int> ids;
    if (const auto* phones = lexicon.lookup(tok)) {
      for (const auto& p : *phones) ids.push_back(inv.id(p));
    } else {
      for (char ch : tok) {
        const int id = inv.letter_id(ch);
        if (id >= 0) ids.push_back(id);
      }
    }
    if (ids.empty()) continue;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      seq.phonemes.push_back(ids[k]);
      seq.word_index.push_back(word);
      pos_in_word.push_back(ids.size() > 1 ? static_cast<double>(k) / static_cast<double>(ids.size() - 1) : 0.0);
      word_final.push_back(k + 1 == ids.size());
      pause_after.push_back(false);
    }
    ++word;
    seen_word = true;
  }
  if (!seen_word) throw Error("text is empty after normalization");

  const int n = static_cast<int>(seq.phonemes.size());
  const int n_sym = inv.size();
  seq.features = Eigen::MatrixXd::Zero(n, n_sym + kLinguisticExtras);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    seq.features(i, seq.phonemes[k]) = 1.0;
    seq.features(i, n_sym + kPosInWord) = pos_in_word[k];
    seq.features(i, n_sym + kPosInUtterance) = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    seq.features(i, n_sym + kWordFinal) = word_final[k] ? 1.0 : 0.0;
    seq.features(i, n_sym + kPauseAfter) = pause_after[k] ? 1.0 : 0.0;
    seq.features(i, n_sym + kIsPause) = seq.phonemes[k] == inv.pause_id() ? 1.0 : 0.0;
  }
  return seq;
}

}  // namespace styletts::tts
