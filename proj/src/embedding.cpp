#include "styletts/embedding.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "styletts/error.hpp"

namespace styletts::corpus {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    if (!cur.empty()) tokens.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80 || (c == '\'' && !cur.empty())) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  return h;
}

HashEmbeddingProvider::HashEmbeddingProvider(std::uint64_t seed, int dim) : seed_(seed), dim_(dim) {
  if (dim <= 0) throw Error("embedding dimension must be positive");
}

Eigen::VectorXd HashEmbeddingProvider::embed(std::string_view token) const {
  std::mt19937_64 gen(fnv1a64(token) ^ seed_);
  Eigen::VectorXd v(dim_);
  constexpr double kScale = 1.0 / 18446744073709551616.0;  // 2^-64
  for (int i = 0; i < dim_; i += 2) {
    const double u1 = (static_cast<double>(gen()) + 1.0) * kScale;
    const double u2 = static_cast<double>(gen()) * kScale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    v(i) = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < dim_) v(i + 1) = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  return v / v.norm();
}

TextFileEmbeddingProvider::TextFileEmbeddingProvider(const std::filesystem::path& path, std::uint64_t fallback_seed)
    : fallback_(fallback_seed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read embedding file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> vals;
    double v = 0.0;
    while (ls >> v) vals.push_back(v);
    if (dim < 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim || dim == 0) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": inconsistent vector width");
    }
    table_[word] = Eigen::Map<Eigen::VectorXd>(vals.data(), dim);
  }
  if (dim > 0) dim_ = dim;
  fallback_ = HashEmbeddingProvider(fallback_seed, dim_);
}

Eigen::VectorXd TextFileEmbeddingProvider::embed(std::string_view token) const {
  if (auto it = table_.find(std::string(token)); it != table_.end()) return it->second;
  return fallback_.embed(token);
}

Eigen::MatrixXd embed_tokens(const std::vector<std::string>& tokens, const EmbeddingProvider& provider) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(tokens.size()), provider.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = provider.embed(tokens[i]).transpose();
  }
  return m;
}

Eigen::MatrixXd embed_tokens(std::string_view text, const EmbeddingProvider& provider) {
  return embed_tokens(tokenize(text), provider);
}

}  // namespace styletts::corpus
