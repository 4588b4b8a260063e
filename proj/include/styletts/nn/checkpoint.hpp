#ifndef STYLETTS_NN_CHECKPOINT_HPP_
#define STYLETTS_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "styletts/nn/param.hpp"

namespace styletts::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Single-file container: magic, format version, JSON config, then named
// tensors stored as raw little-endian doubles. Round trips bit-exactly.
struct Checkpoint {
  std::string kind;     // model type tag, checked on load
  std::string config;   // JSON text
  std::map<std::string, Matrix> tensors;

  void put(const ParamList& params);
  // Copies stored values into params; throws on a missing name or shape.
  void get(const ParamList& params) const;
  const Matrix& tensor(const std::string& name) const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path, const std::string& expected_kind = {});
};

}  // namespace styletts::nn

#endif  // STYLETTS_NN_CHECKPOINT_HPP_
