#pragma once

// Little-endian binary persistence for feature/embedding files ("BMF1") and
// model files ("BMM1"). Values are stored as IEEE-754 binary32.
//
// FeatureFile:  "BMF1" u16 version, u32 dim, u64 count, then per record
//               u32 len + session_id, u32 len + group_id, u32 start_time_ms,
//               dim x f32.
// ModelFile:    "BMM1" u16 version, u16 n_layers, n_layers x u32 sizes,
//               u8 activation, u16 bottleneck index, then for each weight
//               layer the row-major f32 weights followed by f32 biases.
//               Optional trailer: "STAT" u32 dim, dim x f32 mean, dim x f32 std.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bmf/error.hpp"
#include "bmf/functionals.hpp"
#include "bmf/net.hpp"

namespace bmf {

inline constexpr std::uint16_t kFeatureFileVersion = 1;
inline constexpr std::uint16_t kModelFileVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace io_detail {

class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  void f32(double v) { le(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  const std::string& data() const { return buf_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw InputError("failed writing " + path.string());
  }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string name) : buf_(std::move(data)), name_(std::move(name)) {}

  static Reader load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(data), path.string());
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view v(buf_.data() + pos_, n);
    pos_ += n;
    return v;
  }
  template <typename T>
  T le() {
    using U = std::make_unsigned_t<T>;
    auto b = bytes(sizeof(T));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(b[i])) << (8 * i));
    return static_cast<T>(u);
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(le<std::uint32_t>())); }
  std::string str() {
    const auto n = le<std::uint32_t>();
    return std::string(bytes(n));
  }
  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& name() const { return name_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw InputError("truncated file " + name_);
  }
  std::string buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline void expect_magic(Reader& r, std::string_view magic) {
  if (r.remaining() < magic.size() || r.bytes(magic.size()) != magic)
    throw FormatError(r.name() + ": bad magic, expected \"" + std::string(magic) + "\"");
}

}  // namespace io_detail

inline bool valid_feature_dim(std::size_t dim) { return dim == kFeatureDim || dim == kBottleneckDim; }

inline std::string encode_features(std::span<const FeatureWindow> windows, std::size_t dim) {
  if (!valid_feature_dim(dim))
    throw InputError("feature files hold 420- or 64-dim vectors, not " + std::to_string(dim));
  io_detail::Writer w;
  w.bytes("BMF1");
  w.le(kFeatureFileVersion);
  w.le(static_cast<std::uint32_t>(dim));
  w.le(static_cast<std::uint64_t>(windows.size()));
  for (const auto& fw : windows) {
    if (fw.vector.size() != dim) throw InputError("feature record dimension mismatch");
    w.str(fw.session_id);
    w.str(fw.group_id);
    w.le(static_cast<std::uint32_t>(std::llround(fw.start_time_s * 1000.0)));
    for (double v : fw.vector) w.f32(v);
  }
  return w.data();
}

struct FeatureFile {
  std::size_t dim = 0;
  std::vector<FeatureWindow> windows;
};

inline FeatureFile decode_features(std::string data, std::string name = "<memory>") {
  io_detail::Reader r(std::move(data), std::move(name));
  io_detail::expect_magic(r, "BMF1");
  const auto version = r.le<std::uint16_t>();
  if (version != kFeatureFileVersion)
    throw FormatError(r.name() + ": unsupported feature file version " + std::to_string(version));
  FeatureFile f;
  f.dim = r.le<std::uint32_t>();
  if (!valid_feature_dim(f.dim))
    throw InputError(r.name() + ": invalid feature dimension " + std::to_string(f.dim));
  const auto count = r.le<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureWindow fw;
    fw.session_id = r.str();
    fw.group_id = r.str();
    fw.start_time_s = r.le<std::uint32_t>() / 1000.0;
    fw.vector.resize(f.dim);
    for (auto& v : fw.vector) v = r.f32();
    f.windows.push_back(std::move(fw));
  }
  if (r.remaining() != 0) throw InputError(r.name() + ": trailing bytes after last record");
  return f;
}

inline void write_features(const std::filesystem::path& path, std::span<const FeatureWindow> windows,
                           std::size_t dim) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  const auto data = encode_features(windows, dim);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline FeatureFile read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_features(std::move(data), path.string());
}

struct ModelBundle {
  MlpModel model;
  std::optional<FeatureStats> stats;
};

/// Rounds every parameter to binary32, the precision it has on disk.
inline FeatureStats round_to_f32(FeatureStats s) {
  for (auto& v : s.mean) v = static_cast<float>(v);
  for (auto& v : s.std) v = static_cast<float>(v);
  return s;
}

inline std::string encode_model(const ModelBundle& b) {
  const auto& m = b.model;
  validate(m);
  io_detail::Writer w;
  w.bytes("BMM1");
  w.le(kModelFileVersion);
  w.le(static_cast<std::uint16_t>(m.layer_sizes.size()));
  for (auto s : m.layer_sizes) w.le(static_cast<std::uint32_t>(s));
  w.le(static_cast<std::uint8_t>(m.hidden_activation));
  w.le(static_cast<std::uint16_t>(m.bottleneck_index));
  for (std::size_t l = 0; l < m.n_weight_layers(); ++l) {
    for (double v : m.weights[l]) w.f32(v);
    for (double v : m.biases[l]) w.f32(v);
  }
  if (b.stats) {
    if (b.stats->mean.size() != b.stats->std.size()) throw InputError("stats shape mismatch");
    w.bytes("STAT");
    w.le(static_cast<std::uint32_t>(b.stats->mean.size()));
    for (double v : b.stats->mean) w.f32(v);
    for (double v : b.stats->std) w.f32(v);
  }
  return w.data();
}

inline ModelBundle decode_model(std::string data, std::string name = "<memory>") {
  io_detail::Reader r(std::move(data), std::move(name));
  io_detail::expect_magic(r, "BMM1");
  const auto version = r.le<std::uint16_t>();
  if (version != kModelFileVersion)
    throw FormatError(r.name() + ": unsupported model file version " + std::to_string(version));
  ModelBundle b;
  auto& m = b.model;
  const auto n_layers = r.le<std::uint16_t>();
  if (n_layers < 3) throw InputError(r.name() + ": model needs at least 3 layers");
  for (std::uint16_t i = 0; i < n_layers; ++i) {
    m.layer_sizes.push_back(r.le<std::uint32_t>());
    if (m.layer_sizes.back() == 0) throw InputError(r.name() + ": zero-width layer");
  }
  const auto act = r.le<std::uint8_t>();
  if (act != static_cast<std::uint8_t>(Activation::kTanh))
    throw InputError(r.name() + ": unknown activation tag " + std::to_string(act));
  m.hidden_activation = Activation::kTanh;
  m.bottleneck_index = r.le<std::uint16_t>();
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const auto n_w = m.layer_sizes[l] * m.layer_sizes[l + 1];
    if (r.remaining() / 4 < n_w + m.layer_sizes[l + 1]) throw InputError("truncated file " + r.name());
    std::vector<double> wv(n_w), bv(m.layer_sizes[l + 1]);
    for (auto& v : wv) v = r.f32();
    for (auto& v : bv) v = r.f32();
    m.weights.push_back(std::move(wv));
    m.biases.push_back(std::move(bv));
  }
  validate(m);
  if (r.remaining() > 0) {
    if (r.bytes(4) != "STAT") throw InputError(r.name() + ": unrecognised trailer");
    const auto dim = r.le<std::uint32_t>();
    FeatureStats s{std::vector<double>(dim), std::vector<double>(dim)};
    for (auto& v : s.mean) v = r.f32();
    for (auto& v : s.std) v = r.f32();
    if (r.remaining() != 0) throw InputError(r.name() + ": trailing bytes after stats");
    b.stats = std::move(s);
  }
  return b;
}

inline void write_model(const std::filesystem::path& path, const ModelBundle& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  const auto data = encode_model(b);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline ModelBundle read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(std::move(data), path.string());
}

}  // namespace bmf
