#ifndef STYLETTS_EMBEDDING_HPP_
#define STYLETTS_EMBEDDING_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace styletts::corpus {

inline constexpr int kTokenEmbeddingDim = 300;

// Lowercased word tokens; whitespace and punctuation separate tokens,
// apostrophes inside a word are kept.
std::vector<std::string> tokenize(std::string_view text);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd embed(std::string_view token) const = 0;
};

// Unit vector seeded by FNV-1a(token) xor seed. Components are Box-Muller
// normals drawn from a 64-bit Mersenne twister.
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::uint64_t seed = 0, int dim = kTokenEmbeddingDim);
  int dim() const override { return dim_; }
  Eigen::VectorXd embed(std::string_view token) const override;

 private:
  std::uint64_t seed_;
  int dim_;
};

// "word v1 ... vD" per line. Unknown tokens fall back to hashed vectors.
class TextFileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit TextFileEmbeddingProvider(const std::filesystem::path& path, std::uint64_t fallback_seed = 0);
  int dim() const override { return dim_; }
  Eigen::VectorXd embed(std::string_view token) const override;
  std::size_t vocabulary_size() const { return table_.size(); }

 private:
  int dim_ = kTokenEmbeddingDim;
  std::unordered_map<std::string, Eigen::VectorXd> table_;
  HashEmbeddingProvider fallback_;
};

std::uint64_t fnv1a64(std::string_view s);

// L x dim matrix, one row per token; L = 0 for empty text.
Eigen::MatrixXd embed_tokens(const std::vector<std::string>& tokens, const EmbeddingProvider& provider);
Eigen::MatrixXd embed_tokens(std::string_view text, const EmbeddingProvider& provider);

}  // namespace styletts::corpus

#endif  // STYLETTS_EMBEDDING_HPP_
