#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "finj/embeddings.hpp"
#include "finj/feature_cache.hpp"
#include "finj/synthetic.hpp"
#include "oracles.hpp"

using namespace finj;

namespace {

EmbeddingStore random_store(std::uint32_t dim, int count, std::uint64_t seed, std::string backbone = "squeezenet") {
  SplitMix64 rng(seed);
  EmbeddingStore s{std::move(backbone), dim, {}};
  for (int i = 0; i < count; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-10, 10));
    s.insert("Class" + std::to_string(i % 3) + "/tile_" + std::to_string(i) + ".jpg", std::move(v));
  }
  return s;
}

std::vector<std::uint8_t> bytes_of(const EmbeddingStore& s) {
  std::ostringstream out;
  write_embeddings(s, out);
  const auto str = out.str();
  return {str.begin(), str.end()};
}

ErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_embeddings(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "payload decoded without error";
  return ErrorKind::Io;
}

void expect_valid(const EmbeddingStore& s) {
  ASSERT_GT(s.dim, 0u);
  for (const auto& [id, v] : s.records) {
    ASSERT_EQ(v.size(), s.dim) << id;
    for (float x : v) ASSERT_TRUE(std::isfinite(x)) << id;
  }
}

}  // namespace

TEST(Emb1, EmptyStoreIsHeaderOnly) {
  const EmbeddingStore s{"squeezenet", 512, {}};
  const auto bytes = bytes_of(s);
  ASSERT_EQ(bytes.size(), 4u + 1 + 2 + 10 + 4 + 4);
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 5),
            (std::vector<std::uint8_t>{0x46, 0x49, 0x4E, 0x4A, 0x01}));
  EXPECT_EQ(bytes[5], 10);  // name length, little-endian
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(bytes[17], 0x00);  // dim 512 = 0x0200
  EXPECT_EQ(bytes[18], 0x02);
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.end() - 4, bytes.end()), (std::vector<std::uint8_t>{0, 0, 0, 0}));
  EXPECT_EQ(decode_embeddings(bytes), s);
}

TEST(Emb1, RoundTripIsBitExact) {
  auto s = random_store(7, 25, 1);
  s.records.begin()->second = {0.0f, -0.0f, std::numeric_limits<float>::denorm_min(),
                               std::numeric_limits<float>::max(), -std::numeric_limits<float>::min(),
                               1.0f / 3.0f, -1e-30f};
  std::stringstream io;
  const auto n = write_embeddings(s, io);
  EXPECT_EQ(n, io.str().size());
  const auto back = read_embeddings(io);
  ASSERT_EQ(back.records.size(), s.records.size());
  EXPECT_EQ(back.backbone, s.backbone);
  for (const auto& [id, v] : s.records) {
    const auto& w = back.at(id);
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_EQ(std::bit_cast<std::uint32_t>(v[k]), std::bit_cast<std::uint32_t>(w[k]));
  }
}

TEST(Emb1, RecordsWrittenInIdOrder) {
  EmbeddingStore s{"x", 1, {}};
  s.insert("b", {2});
  s.insert("a", {1});
  s.insert("c/a", {3});
  const auto bytes = bytes_of(s);
  const std::string text(bytes.begin(), bytes.end());
  EXPECT_LT(text.find('a'), text.find('b'));
  EXPECT_LT(text.find('b'), text.find("c/a"));
}

TEST(Emb1, SqueezeNetScaleFileSizeArithmetic) {
  EmbeddingStore s{"squeezenet", 512, {}};
  std::size_t records_bytes = 0;
  const std::vector<float> zeros(512, 0.0f);
  for (int i = 0; i < 27000; ++i) {
    std::string id = "Forest/Forest_" + std::to_string(i) + ".jpg";
    records_bytes += 2 + id.size() + 512 * 4;
    s.records.emplace(std::move(id), zeros);
  }
  std::ostringstream out;
  EXPECT_EQ(write_embeddings(s, out), 4u + 1 + (2 + 10) + 4 + 4 + records_bytes);
  EXPECT_EQ(out.str().size(), 4u + 1 + (2 + 10) + 4 + 4 + records_bytes);
}

TEST(Emb1, BadMagicIsFormatError) {
  auto bytes = bytes_of(random_store(4, 2, 2));
  bytes[0] = 'X';
  bytes[1] = 'X';
  bytes[2] = 'X';
  bytes[3] = 'X';
  EXPECT_EQ(kind_of(bytes), ErrorKind::Format);
}

TEST(Emb1, UnknownVersionIsFormatError) {
  auto bytes = bytes_of(random_store(4, 2, 2));
  bytes[4] = 0x02;
  EXPECT_EQ(kind_of(bytes), ErrorKind::Format);
}

TEST(Emb1, ShortRecordIsValidationErrorNamingRecord) {
  auto s = random_store(512, 3, 3);
  auto bytes = bytes_of(s);
  bytes.resize(bytes.size() - 4);  // last record now holds 511 floats
  try {
    decode_embeddings(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    EXPECT_NE(std::string(e.what()).find(s.records.rbegin()->first), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("511"), std::string::npos) << e.what();
  }
}

TEST(Emb1, TruncatedHeaderIsFormatError) {
  const auto bytes = bytes_of(random_store(4, 2, 4));
  for (std::size_t n : {0, 3, 5, 9, 17, 20, 23}) {
    EXPECT_EQ(kind_of({bytes.begin(), bytes.begin() + static_cast<long>(n)}), ErrorKind::Format) << n;
  }
}

TEST(Emb1, TrailingBytesAreFormatError) {
  auto bytes = bytes_of(random_store(4, 2, 5));
  bytes.push_back(0);
  EXPECT_EQ(kind_of(bytes), ErrorKind::Format);
}

TEST(Emb1, DuplicateIdsAndNonFiniteValuesRejected) {
  detail::ByteWriter w;
  for (auto b : kEmbMagic) w.u8(b);
  w.u8(1);
  w.str16("x", "");
  w.u32(1);
  w.u32(2);
  w.str16("a", "");
  w.f32(1);
  w.str16("a", "");
  w.f32(2);
  EXPECT_EQ(kind_of(w.bytes), ErrorKind::Validation);

  detail::ByteWriter n;
  for (auto b : kEmbMagic) n.u8(b);
  n.u8(1);
  n.str16("x", "");
  n.u32(1);
  n.u32(1);
  n.str16("a", "");
  n.f32(std::numeric_limits<float>::quiet_NaN());
  EXPECT_EQ(kind_of(n.bytes), ErrorKind::Validation);
}

TEST(Emb1, ZeroDimIsFormatError) {
  detail::ByteWriter w;
  for (auto b : kEmbMagic) w.u8(b);
  w.u8(1);
  w.str16("x", "");
  w.u32(0);
  w.u32(0);
  EXPECT_EQ(kind_of(w.bytes), ErrorKind::Format);
}

TEST(Emb1, StoreInsertEnforcesInvariants) {
  EmbeddingStore s{"x", 3, {}};
  EXPECT_THROW(s.insert("a", {1, 2}), Error);
  EXPECT_THROW(s.insert("a", {1, 2, std::numeric_limits<float>::infinity()}), Error);
  s.insert("a", {1, 2, 3});
  EXPECT_THROW(s.insert("a", {1, 2, 3}), Error);
  EXPECT_THROW(s.at("missing"), Error);
}

TEST(Emb1, FuzzedPayloadsNeverYieldInvalidStores) {
  const auto original = random_store(5, 6, 6);
  const auto bytes = bytes_of(original);
  SplitMix64 rng(77);
  int rejected = 0, accepted = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    auto corrupt = bytes;
    const int mode = trial % 3;
    if (mode == 0) {
      corrupt[rng.below(corrupt.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
    } else if (mode == 1) {
      corrupt.resize(rng.below(corrupt.size()));
    } else {
      for (int k = 0; k < 4; ++k) corrupt[rng.below(corrupt.size())] = static_cast<std::uint8_t>(rng.below(256));
    }
    try {
      const auto s = decode_embeddings(corrupt);
      expect_valid(s);
      ++accepted;
    } catch (const Error&) {
      ++rejected;
    }
  }
  // Every truncation is caught; accepted payloads are in-place value or id edits.
  EXPECT_GE(rejected, 1000);
  RecordProperty("rejected", rejected);
  RecordProperty("accepted", accepted);
}

TEST(Emb1, EveryTruncationIsRejected) {
  const auto bytes = bytes_of(random_store(3, 4, 8));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    EXPECT_THROW(decode_embeddings({bytes.data(), n}), Error) << n;
  }
}

TEST(Backbone, RegistryMatchesPublishedDims) {
  EXPECT_EQ(backbone_spec("squeezenet").expected_dim, 512u);
  EXPECT_EQ(backbone_spec("mobilenetv2").expected_dim, 1280u);
  EXPECT_EQ(backbone_spec("shufflenetv2").expected_dim, 1024u);
  EXPECT_EQ(backbone_spec("vgg16").expected_dim, 512u);
  EXPECT_EQ(backbone_spec("resnet50v2").expected_dim, 2048u);
  EXPECT_EQ(backbone_spec("squeezenet").param_count, 729'000u);
  EXPECT_DOUBLE_EQ(backbone_spec("vgg16").model_size_mb, 528.0);
  EXPECT_THROW(backbone_spec("alexnet"), Error);
  EXPECT_EQ(display_name("shufflenetv2"), "ShuffleNetV2");
  EXPECT_EQ(display_name("custom"), "custom");
}

TEST(Backbone, CheckExamples) {
  const auto report = check_backbone(random_store(512, 3, 1), backbone_spec("squeezenet"));
  EXPECT_EQ(report.records, 3u);
  EXPECT_EQ(report.dim, 512u);
  try {
    check_backbone(random_store(1024, 1, 1), backbone_spec("mobilenetv2"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
  EXPECT_NO_THROW(check_backbone(random_store(2048, 1, 1, "resnet50v2"), backbone_spec("resnet50v2")));
}

TEST(Synthetic, DeterministicAndShaped) {
  const auto img = oracle::random_rgb(64, 64, 1);
  const auto a = synthetic_backbone(img, 512, 9);
  const auto b = synthetic_backbone(img, 512, 9);
  EXPECT_EQ(a.size(), 512u);
  EXPECT_EQ(a, b);
  for (float v : a) EXPECT_GE(v, 0.0f);
  EXPECT_NE(synthetic_backbone(img, 512, 10), a);
}

TEST(Synthetic, DistinctTilesDiffer) {
  const auto a = synthetic_backbone(oracle::random_rgb(64, 64, 2), 512, 9);
  const auto b = synthetic_backbone(oracle::random_rgb(64, 64, 3), 512, 9);
  EXPECT_NE(a, b);
}

TEST(Synthetic, IndependentOfCallOrder) {
  const auto x = oracle::random_rgb(16, 16, 4);
  const auto y = oracle::random_rgb(16, 16, 5);
  SyntheticBackbone first(32, 1), second(32, 1);
  const auto x1 = first.embed(x);
  const auto y1 = first.embed(y);
  const auto y2 = second.embed(y);
  const auto x2 = second.embed(x);
  EXPECT_EQ(x1, x2);
  EXPECT_EQ(y1, y2);
}

TEST(Synthetic, MatchesDirectProjection) {
  const auto img = oracle::random_rgb(4, 3, 6);
  const auto n = img.data.size();
  const double scale = std::sqrt(3.0 / static_cast<double>(n));
  const auto v = synthetic_backbone(img, 5, 11);
  for (std::size_t k = 0; k < 5; ++k) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(SplitMix64::at(11, k * n + i) >> 11) * 0x1.0p-53;
      acc += static_cast<float>((2 * u - 1) * scale) * static_cast<double>(img.data[i] / 255.0f);
    }
    EXPECT_NEAR(v[k], std::max(acc, 0.0), 1e-5);
  }
}

TEST(FeatureCache, RoundTripIsExact) {
  FeatureCache cache;
  for (int i = 0; i < 5; ++i) {
    cache.emplace("c/" + std::to_string(i), extract_all(oracle::random_rgb(12, 12, i), FeatureSelection::all()));
  }
  std::stringstream io;
  write_feature_cache(io, cache);
  const auto back = read_feature_cache(io);
  ASSERT_EQ(back.size(), cache.size());
  for (const auto& [id, fv] : cache) EXPECT_EQ(back.at(id).flat(), fv.flat()) << id;
}

TEST(FeatureCache, PartialSelectionRoundTrips) {
  FeatureCache cache;
  cache.emplace("a", extract_all(oracle::random_rgb(8, 8, 1), FeatureSelection::parse("glcm,hog")));
  std::stringstream io;
  write_feature_cache(io, cache);
  const auto back = read_feature_cache(io);
  EXPECT_EQ(back.at("a").selection(), FeatureSelection::parse("glcm,hog"));
}

TEST(FeatureCache, MalformedLinesRejected) {
  for (const char* text : {"not json\n", "{\"id\": 3}\n", "{\"id\": \"a\", \"groups\": {\"mean\": [1, 2]}}\n",
                           "{\"id\": \"a\", \"groups\": {\"bogus\": []}}\n",
                           "{\"id\":\"a\",\"groups\":{}}\n{\"id\":\"a\",\"groups\":{}}\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_feature_cache(in), Error) << text;
  }
}
