#include "styletts/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "styletts/error.hpp"

namespace styletts::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'T', 'Y', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_raw<std::uint64_t>(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string string() {
    const auto n = raw<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void copy(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const ParamList& params) {
  for (const Param* p : params) tensors[p->name] = p->value;
}

void Checkpoint::get(const ParamList& params) const {
  for (Param* p : params) {
    const Matrix& m = tensor(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ParseError("checkpoint tensor \"" + p->name + "\" has shape " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
                       std::to_string(p->value.cols()));
    }
    p->value = m;
  }
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ParseError("checkpoint is missing tensor \"" + name + "\"");
  return it->second;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_raw<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, kind);
  put_string(out, config);
  put_raw<std::uint64_t>(out, tensors.size());
  for (const auto& [name, m] : tensors) {
    put_string(out, name);
    put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    const auto* p = reinterpret_cast<const std::uint8_t*>(m.data());
    out.insert(out.end(), p, p + static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a model checkpoint");
  }
  std::vector<std::uint8_t> body(bytes.begin() + sizeof(kMagic), bytes.end());
  Reader r(body);
  const auto version = r.raw<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.kind = r.string();
  c.config = r.string();
  const auto n = r.raw<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.string();
    const auto rows = r.raw<std::uint64_t>();
    const auto cols = r.raw<std::uint64_t>();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    r.copy(m.data(), static_cast<std::size_t>(rows * cols) * sizeof(double));
    c.tensors.emplace(std::move(name), std::move(m));
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint c = deserialize(bytes);
  if (!expected_kind.empty() && c.kind != expected_kind) {
    throw ParseError(path.string() + ": expected a " + expected_kind + " checkpoint, found " + c.kind);
  }
  return c;
}

}  // namespace styletts::nn
