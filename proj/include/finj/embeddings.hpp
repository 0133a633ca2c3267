#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finj/error.hpp"

namespace finj {

// Frozen-CNN vectors for one backbone, keyed (and therefore written) in id order.
struct EmbeddingStore {
  std::string backbone;
  std::uint32_t dim = 0;
  std::map<std::string, std::vector<float>> records;

  const std::vector<float>& at(const std::string& id) const {
    const auto it = records.find(id);
    require(it != records.end(), ErrorKind::Join, "no embedding for " + id);
    return it->second;
  }

  void insert(std::string id, std::vector<float> vector) {
    require(vector.size() == dim, ErrorKind::Validation,
            "embedding for " + id + " has " + std::to_string(vector.size()) + " values, store dim is " +
                std::to_string(dim));
    for (float v : vector) {
      require(std::isfinite(v), ErrorKind::Validation, "embedding for " + id + " is not finite");
    }
    require(records.emplace(std::move(id), std::move(vector)).second, ErrorKind::Validation,
            "duplicate embedding id");
  }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;
};

struct BackboneSpec {
  std::string_view name;          // registry key, as used by the exporter
  std::string_view display_name;  // as printed in comparison tables
  std::uint32_t expected_dim;
  double model_size_mb;
  std::uint64_t param_count;
};

inline constexpr std::array<BackboneSpec, 5> kBackbones = {{
    {"squeezenet", "SqueezeNet", 512, 0.5, 729'000},
    {"mobilenetv2", "MobileNetV2", 1280, 14.0, 2'200'000},
    {"shufflenetv2", "ShuffleNetV2", 1024, 10.0, 4'000'000},
    {"vgg16", "VGG16", 512, 528.0, 14'700'000},
    {"resnet50v2", "ResNet50V2", 2048, 98.0, 23'500'000},
}};

inline std::optional<BackboneSpec> find_backbone(std::string_view name) {
  for (const auto& b : kBackbones) {
    if (b.name == name) return b;
  }
  return std::nullopt;
}

inline const BackboneSpec& backbone_spec(std::string_view name) {
  for (const auto& b : kBackbones) {
    if (b.name == name) return b;
  }
  fail(ErrorKind::Config, "unknown backbone '" + std::string(name) +
                              "' (expected squeezenet, mobilenetv2, shufflenetv2, vgg16 or resnet50v2)");
}

// Table label for a store: registry display name, else the raw backbone name.
inline std::string display_name(std::string_view backbone) {
  if (const auto spec = find_backbone(backbone)) return std::string(spec->display_name);
  return std::string(backbone);
}

// ---------------------------------------------------------------------------
// EMB1: "FINJ" 0x01 | u16 name_len, name | u32 dim | u32 count |
//       count x (u16 id_len, id, dim x f32), all little-endian.

inline constexpr std::array<std::uint8_t, 4> kEmbMagic = {0x46, 0x49, 0x4E, 0x4A};
inline constexpr std::uint8_t kEmbVersion = 0x01;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str16(std::string_view s, std::string_view what) {
    require(s.size() <= 0xFFFF, ErrorKind::Validation, std::string(what) + " longer than 65535 bytes");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  bool has(std::size_t n) const { return remaining() >= n; }

  std::uint8_t u8(std::string_view what) {
    need(1, what);
    return data_[pos_++];
  }
  std::uint16_t u16(std::string_view what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(std::string_view what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32("float")); }
  std::string str(std::size_t n, std::string_view what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, std::string_view what) {
    require(has(n), ErrorKind::Format, "EMB1: truncated payload while reading " + std::string(what));
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_embeddings(const EmbeddingStore& store) {
  require(store.dim > 0, ErrorKind::Validation, "EMB1: store dim must be positive");
  require(store.records.size() <= 0xFFFFFFFFu, ErrorKind::Validation, "EMB1: too many records");
  detail::ByteWriter w;
  for (auto b : kEmbMagic) w.u8(b);
  w.u8(kEmbVersion);
  w.str16(store.backbone, "backbone name");
  w.u32(store.dim);
  w.u32(static_cast<std::uint32_t>(store.records.size()));
  for (const auto& [id, vec] : store.records) {
    require(vec.size() == store.dim, ErrorKind::Validation, "EMB1: record " + id + " has wrong length");
    w.str16(id, "record id");
    for (float v : vec) w.f32(v);
  }
  return std::move(w.bytes);
}

inline std::size_t write_embeddings(const EmbeddingStore& store, std::ostream& sink) {
  const auto bytes = encode_embeddings(store);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(sink), ErrorKind::Io, "EMB1: write failed");
  return bytes.size();
}

inline EmbeddingStore decode_embeddings(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  for (auto b : kEmbMagic) {
    require(r.u8("magic") == b, ErrorKind::Format, "EMB1: bad magic (expected \"FINJ\")");
  }
  const auto version = r.u8("version");
  require(version == kEmbVersion, ErrorKind::Format,
          "EMB1: unsupported version " + std::to_string(version));
  EmbeddingStore store;
  store.backbone = r.str(r.u16("backbone length"), "backbone name");
  store.dim = r.u32("dim");
  require(store.dim > 0, ErrorKind::Format, "EMB1: dim must be positive");
  const auto count = r.u32("record count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto id = r.str(r.u16("id length"), "record id");
    const std::size_t want = static_cast<std::size_t>(store.dim) * 4;
    require(r.has(want), ErrorKind::Validation,
            "EMB1: record " + id + " holds " + std::to_string(r.remaining() / 4) + " of " +
                std::to_string(store.dim) + " floats (truncated)");
    std::vector<float> vec(store.dim);
    for (auto& v : vec) v = r.f32();
    store.insert(id, std::move(vec));
  }
  require(r.remaining() == 0, ErrorKind::Format,
          "EMB1: " + std::to_string(r.remaining()) + " trailing bytes after the last record");
  return store;
}

inline EmbeddingStore read_embeddings(std::istream& source) {
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(source),
                                        std::istreambuf_iterator<char>()};
  return decode_embeddings(bytes);
}

struct BackboneReport {
  std::string backbone;
  std::uint32_t dim = 0;
  std::uint32_t expected_dim = 0;
  std::size_t records = 0;
};

inline BackboneReport check_backbone(const EmbeddingStore& store, const BackboneSpec& spec) {
  require(store.dim == spec.expected_dim, ErrorKind::Validation,
          "store dim " + std::to_string(store.dim) + " does not match " + std::string(spec.name) +
              " (expected " + std::to_string(spec.expected_dim) + ")");
  return {std::string(spec.name), store.dim, spec.expected_dim, store.records.size()};
}

}  // namespace finj
