#ifndef STYLETTS_FRONTEND_HPP_
#define STYLETTS_FRONTEND_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace styletts::tts {

// 39 ARPAbet phonemes, a pause symbol, then one fallback symbol per letter.
class PhonemeInventory {
 public:
  static const PhonemeInventory& instance();

  int size() const { return static_cast<int>(symbols_.size()); }
  int id(std::string_view symbol) const;  // throws on unknown symbols
  bool contains(std::string_view symbol) const;
  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  int pause_id() const { return pause_id_; }
  int letter_id(char c) const;

 private:
  PhonemeInventory();
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  int pause_id_ = 0;
};

// Extra per-phoneme features after the one-hot block.
inline constexpr int kLinguisticExtras = 5;
int linguistic_feature_dim();

class Lexicon {
 public:
  Lexicon() = default;
  // "word<TAB>PH1 PH2 ..." per line; '#' starts a comment.
  static Lexicon load(const std::filesystem::path& path);
  static Lexicon parse(std::string_view content);
  // The mini-lexicon shipped in data/.
  static Lexicon shipped();

  const std::vector<std::string>* lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

// Lowercase, expand cardinals 0-9999 (longer digit runs are read digit by
// digit) and keep punctuation as separate tokens.
std::vector<std::string> normalize_text(std::string_view text);
std::string expand_number(int n);

struct LinguisticSequence {
  std::vector<int> phonemes;
  std::vector<int> word_index;  // -1 for inserted pauses
  Eigen::MatrixXd features;     // N x (inventory + 5)

  std::size_t size() const { return phonemes.size(); }
};

// Column offsets of the extra features.
enum LinguisticExtra : int {
  kPosInWord = 0,
  kPosInUtterance = 1,
  kWordFinal = 2,
  kPauseAfter = 3,
  kIsPause = 4,
};

// Dictionary G2P with per-letter fallback. Punctuation sets the pause flag on
// the preceding phoneme; punctuation between words also inserts a pause.
LinguisticSequence text_to_linguistic(std::string_view text, const Lexicon& lexicon);

}  // namespace styletts::tts

#endif  // STYLETTS_FRONTEND_HPP_
