#ifndef STYLETTS_STYLE_HPP_
#define STYLETTS_STYLE_HPP_

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace styletts {

// Canonical style order. The index is used everywhere a 6-vector appears.
enum class StyleLabel : int { kRushed = 0, kSoft, kNeutral, kHappy, kAngry, kSad };

inline constexpr int kNumStyles = 6;

inline constexpr std::array<StyleLabel, kNumStyles> kAllStyles = {
    StyleLabel::kRushed, StyleLabel::kSoft,  StyleLabel::kNeutral,
    StyleLabel::kHappy,  StyleLabel::kAngry, StyleLabel::kSad};

constexpr int style_index(StyleLabel s) { return static_cast<int>(s); }
StyleLabel style_from_index(int index);

std::string_view style_name(StyleLabel s);
// Exact canonical name lookup ("rushed" ... "sad"); nullopt otherwise.
std::optional<StyleLabel> parse_style(std::string_view name);

// Probability vector over the six styles in canonical order.
struct StyleEmbedding {
  std::array<double, kNumStyles> p{};

  double operator[](int i) const { return p[static_cast<std::size_t>(i)]; }
  double sum() const;
  StyleLabel argmax() const;
  bool operator==(const StyleEmbedding&) const = default;
};

inline constexpr double kSimplexTolerance = 1e-6;

// Entries >= 0 (within tolerance) and sum within tolerance of 1.
bool on_simplex(const StyleEmbedding& e, double tol = kSimplexTolerance);

}  // namespace styletts

#endif  // STYLETTS_STYLE_HPP_
