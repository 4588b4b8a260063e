#include "styletts/style.hpp"

#include <cmath>

#include "styletts/error.hpp"

namespace styletts {

namespace {
constexpr std::array<std::string_view, kNumStyles> kNames = {
    "rushed", "soft", "neutral", "happy", "angry", "sad"};
}

StyleLabel style_from_index(int index) {
  if (index < 0 || index >= kNumStyles) {
    throw Error("style index out of range: " + std::to_string(index));
  }
  return static_cast<StyleLabel>(index);
}

std::string_view style_name(StyleLabel s) {
  return kNames[static_cast<std::size_t>(style_index(s))];
}

std::optional<StyleLabel> parse_style(std::string_view name) {
  for (int i = 0; i < kNumStyles; ++i) {
    if (kNames[static_cast<std::size_t>(i)] == name) return static_cast<StyleLabel>(i);
  }
  return std::nullopt;
}

double StyleEmbedding::sum() const {
  double s = 0.0;
  for (double v : p) s += v;
  return s;
}

StyleLabel StyleEmbedding::argmax() const {
  int best = 0;
  for (int i = 1; i < kNumStyles; ++i) {
    if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
  }
  return static_cast<StyleLabel>(best);
}

bool on_simplex(const StyleEmbedding& e, double tol) {
  for (double v : e.p) {
    if (!std::isfinite(v) || v < -tol) return false;
  }
  return std::abs(e.sum() - 1.0) <= tol;
}

}  // namespace styletts
