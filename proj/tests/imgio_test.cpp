#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "finj/codec.hpp"
#include "finj/dataset.hpp"
#include "finj/image.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace finj;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("finj_imgio_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DatasetManifest synthetic_manifest(int classes, int per_class) {
  DatasetManifest m;
  m.root = "/nonexistent";
  for (int c = 0; c < classes; ++c) {
    m.classes.push_back("class" + std::to_string(c));
    for (int i = 0; i < per_class; ++i) {
      m.records.push_back({"class" + std::to_string(c) + "/img" + std::to_string(i) + ".png", c});
    }
  }
  std::sort(m.records.begin(), m.records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return m;
}

}  // namespace

TEST(Luma, KnownPixels) {
  EXPECT_EQ(luma(255, 255, 255), 255);
  EXPECT_EQ(luma(0, 0, 0), 0);
  EXPECT_EQ(luma(255, 0, 0), 76);
  EXPECT_EQ(luma(0, 255, 0), 150);  // 149.685
  EXPECT_EQ(luma(0, 0, 255), 29);   // 29.07
}

TEST(Luma, MatchesRoundedFloatingFormulaAwayFromHalves) {
  for (int r = 0; r < 256; r += 5)
    for (int g = 0; g < 256; g += 7)
      for (int b = 0; b < 256; b += 11) {
        const double y = 0.299 * r + 0.587 * g + 0.114 * b;
        if (std::abs(y - std::floor(y) - 0.5) < 1e-6) continue;
        EXPECT_EQ(luma(r, g, b), static_cast<int>(std::lround(y)));
      }
}

TEST(Luma, HalfwayRoundsUp) {
  // 0.299*0 + 0.587*0 + 0.114*b hits .5 when 114 b ends in 500 (b = 250: 28.5).
  EXPECT_EQ(luma(0, 0, 250), 29);
}

TEST(ToGray, IdempotentOnNeutralPixels) {
  ImageGray gray(16, 16);
  for (int v = 0; v < 256; ++v) gray.data[v] = static_cast<std::uint8_t>(v);
  EXPECT_EQ(to_gray(expand_gray(gray)), gray);
}

TEST(Decode, PngRoundTrip) {
  const auto img = oracle::random_rgb(64, 64, 3);
  const auto decoded = decode_image(encode_png(img), "tile.png");
  EXPECT_EQ(decoded, img);
}

TEST(Decode, JpegTileHasExpectedShape) {
  const auto img = oracle::random_rgb(64, 64, 4);
  const auto decoded = decode_image(encode_jpeg(img, 95), "tile.jpg");
  EXPECT_EQ(decoded.width, 64);
  EXPECT_EQ(decoded.height, 64);
  EXPECT_EQ(decoded.data.size(), 64u * 64u * 3u);
}

TEST(Decode, OnePixelWhitePng) {
  ImageRGB px(1, 1, {255, 255, 255});
  const auto decoded = decode_image(encode_png(px));
  EXPECT_EQ(decoded.width, 1);
  EXPECT_EQ(decoded.data, (std::vector<std::uint8_t>{255, 255, 255}));
}

TEST(Decode, TruncatedJpegFailsWithName) {
  auto bytes = encode_jpeg(oracle::random_rgb(64, 64, 5));
  bytes.resize(bytes.size() / 2);
  try {
    decode_image(bytes, "broken.jpg");
    FAIL() << "expected a decode error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Decode);
    EXPECT_NE(std::string(e.what()).find("broken.jpg"), std::string::npos);
  }
}

TEST(Decode, TruncatedPngFails) {
  auto bytes = encode_png(oracle::random_rgb(32, 32, 6));
  bytes.resize(bytes.size() - 20);
  EXPECT_THROW(decode_image(bytes, "broken.png"), Error);
}

TEST(Decode, GarbageFails) {
  const std::vector<std::uint8_t> junk = {'h', 'e', 'l', 'l', 'o'};
  EXPECT_THROW(decode_image(junk, "junk.bin"), Error);
}

TEST(ScanDataset, ThreeClassesTwoImages) {
  TempDir dir;
  for (const char* cls : {"Forest", "AnnualCrop", "River"}) {
    for (int i = 0; i < 2; ++i) {
      write_bytes(dir.path() / cls / (std::string(cls) + "_" + std::to_string(i) + ".png"),
                  encode_png(oracle::random_rgb(8, 8, i)));
    }
  }
  std::ofstream(dir.path() / "River" / "notes.txt") << "not an image";
  const auto m = scan_dataset(dir.path());
  EXPECT_EQ(m.classes, (std::vector<std::string>{"AnnualCrop", "Forest", "River"}));
  ASSERT_EQ(m.records.size(), 6u);
  EXPECT_EQ(m.skipped_files, 1u);
  EXPECT_EQ(m.records.front().id, "AnnualCrop/AnnualCrop_0.png");
  EXPECT_EQ(m.records.front().label, 0);
  EXPECT_EQ(m.records.back().label, 2);
  EXPECT_TRUE(std::is_sorted(m.records.begin(), m.records.end(),
                             [](const auto& a, const auto& b) { return a.id < b.id; }));
}

TEST(ScanDataset, MissingRootIsIngestError) {
  try {
    scan_dataset("/definitely/not/here");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Ingest);
  }
}

TEST(ScanDataset, EmptyRootIsIngestError) {
  TempDir dir;
  EXPECT_THROW(scan_dataset(dir.path()), Error);
}

TEST(Split, EightyTwentyPerClass) {
  const auto m = synthetic_manifest(10, 100);
  const auto s = split_dataset(m, 0.8, 42);
  EXPECT_EQ(s.train_ids.size(), 800u);
  EXPECT_EQ(s.test_ids.size(), 200u);
  const auto labels = m.label_index();
  std::vector<int> per_class(10, 0);
  for (const auto& id : s.train_ids) ++per_class[labels.at(id)];
  for (int c : per_class) EXPECT_EQ(c, 80);
}

TEST(Split, EuroSatScaleCounts) {
  // Per-class tile counts of the EuroSAT RGB release.
  const std::vector<int> sizes = {3000, 3000, 3000, 2500, 2500, 2000, 2500, 3000, 2500, 3000};
  DatasetManifest m;
  for (int c = 0; c < 10; ++c) {
    m.classes.push_back("c" + std::to_string(c));
    for (int i = 0; i < sizes[c]; ++i) m.records.push_back({"c" + std::to_string(c) + "/" + std::to_string(i), c});
  }
  ASSERT_EQ(m.records.size(), 27000u);
  const auto s = split_dataset(m, 0.8, 1);
  EXPECT_EQ(s.train_ids.size(), 21600u);
  EXPECT_EQ(s.test_ids.size(), 5400u);
}

TEST(Split, PartitionAndStratification) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = synthetic_manifest(3, 7 + static_cast<int>(seed));
    const double ratio = 0.29 + 0.03 * static_cast<double>(seed);
    const auto s = split_dataset(m, ratio, seed);
    std::set<std::string> train(s.train_ids.begin(), s.train_ids.end());
    std::set<std::string> test(s.test_ids.begin(), s.test_ids.end());
    EXPECT_EQ(train.size(), s.train_ids.size());
    for (const auto& id : test) EXPECT_FALSE(train.count(id));
    EXPECT_EQ(train.size() + test.size(), m.records.size());
    const auto labels = m.label_index();
    std::vector<double> per_class(3, 0);
    for (const auto& id : s.train_ids) per_class[labels.at(id)] += 1;
    for (double c : per_class) EXPECT_LE(std::abs(c - ratio * (7 + static_cast<double>(seed))), 1.0);
  }
}

TEST(Split, RatioWithBinaryRepresentationError) {
  const auto m = synthetic_manifest(1, 100);
  EXPECT_EQ(split_dataset(m, 0.29, 0).train_ids.size(), 29u);
}

TEST(Split, DeterministicAndSeedSensitive) {
  const auto m = synthetic_manifest(4, 50);
  const auto a = split_dataset(m, 0.8, 7);
  const auto b = split_dataset(m, 0.8, 7);
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_NE(split_dataset(m, 0.8, 8).train_ids, a.train_ids);
  EXPECT_EQ(a.generator, "splitmix64");
}

TEST(Split, JsonRoundTrip) {
  const auto s = split_dataset(synthetic_manifest(2, 5), 0.6, 3);
  const auto j = to_json(s);
  EXPECT_EQ(j.at("generator"), "splitmix64");
  EXPECT_EQ(split_from_json(nlohmann::json::parse(j.dump())), s);
}

TEST(Split, Errors) {
  const auto m = synthetic_manifest(2, 1);
  EXPECT_THROW(split_dataset(m, 0.8, 0), Error);
  const auto ok = synthetic_manifest(2, 4);
  EXPECT_THROW(split_dataset(ok, 0.0, 0), Error);
  EXPECT_THROW(split_dataset(ok, 1.0, 0), Error);
}

TEST(SplitMix64, ReferenceOutputs) {
  // First outputs for seed 1234567 from the reference C implementation.
  SplitMix64 rng(1234567);
  EXPECT_EQ(rng.next(), 6457827717110365317ULL);
  EXPECT_EQ(rng.next(), 3203168211198807973ULL);
  EXPECT_EQ(SplitMix64::at(1234567, 1), 3203168211198807973ULL);
}
