#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "finj/codec.hpp"
#include "finj/dataset.hpp"
#include "finj/embeddings.hpp"
#include "finj/error.hpp"
#include "finj/image.hpp"
#include "finj/parallel.hpp"
#include "finj/rng.hpp"
#include "finj/synthetic.hpp"

namespace finj {

// Procedural 10-class stand-in for EuroSAT. Classes come in pairs that share
// a color palette and differ in texture orientation, frequency or block
// size, which a linear projection of raw pixels captures poorly.
inline constexpr std::array<std::string_view, 10> kFixtureClasses = {
    "AnnualCrop", "Forest",      "HerbaceousVegetation", "Highway", "Industrial",
    "Pasture",    "PermanentCrop", "Residential",        "River",   "SeaLake"};

namespace detail {

enum class Texture { Stripes, Noise, Checker, Smooth };

struct ClassRecipe {
  std::array<double, 3> color;
  Texture texture;
  double angle;      // stripe orientation in degrees
  double period;     // stripe period, noise wavelength or checker block size in pixels
  double amplitude;  // texture contrast in 8-bit units
};

inline ClassRecipe fixture_recipe(std::size_t label) {
  switch (label) {
    case 0: return {{150, 130, 90}, Texture::Stripes, 0, 8, 30};        // AnnualCrop
    case 1: return {{60, 95, 55}, Texture::Noise, 0, 3, 28};            // Forest
    case 2: return {{60, 95, 55}, Texture::Noise, 0, 14, 28};           // HerbaceousVegetation
    case 3: return {{120, 120, 115}, Texture::Stripes, 45, 10, 30};     // Highway
    case 4: return {{135, 125, 125}, Texture::Checker, 0, 4, 30};       // Industrial
    case 5: return {{110, 150, 80}, Texture::Smooth, 0, 32, 10};        // Pasture
    case 6: return {{150, 130, 90}, Texture::Stripes, 90, 8, 30};       // PermanentCrop
    case 7: return {{135, 125, 125}, Texture::Checker, 0, 12, 30};      // Residential
    case 8: return {{120, 120, 115}, Texture::Stripes, 135, 10, 30};    // River
    case 9: return {{40, 75, 120}, Texture::Smooth, 0, 32, 10};         // SeaLake
  }
  fail(ErrorKind::Contract, "fixture: label out of range");
}

}  // namespace detail

// Deterministic tile for (class, index, seed).
inline ImageRGB fixture_tile(std::size_t label, std::size_t index, std::uint64_t seed, int size = 64) {
  using detail::Texture;
  const auto recipe = detail::fixture_recipe(label);
  SplitMix64 rng(SplitMix64::at(seed, label * 1'000'003 + index));
  constexpr double kPi = std::numbers::pi;

  std::array<double, 3> color{};
  for (int c = 0; c < 3; ++c) color[c] = recipe.color[c] + rng.uniform(-18, 18);
  const double gain = rng.uniform(0.85, 1.15);
  const double amplitude = recipe.amplitude * rng.uniform(0.8, 1.2);
  const double theta = (recipe.angle + rng.uniform(-8, 8)) * kPi / 180.0;
  const double period = recipe.period * rng.uniform(0.9, 1.1);
  const double phase = rng.uniform(0, 2 * kPi);
  const double ox = rng.uniform(0, period), oy = rng.uniform(0, period);

  // Noise textures: a few random-orientation waves at one wavelength.
  std::array<std::array<double, 3>, 6> waves{};
  for (auto& w : waves) w = {rng.uniform(0, kPi), rng.uniform(0, 2 * kPi), rng.uniform(0.7, 1.3)};

  ImageRGB img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double t = 0;
      switch (recipe.texture) {
        case Texture::Stripes:
          t = std::sin(2 * kPi * (x * std::cos(theta) + y * std::sin(theta)) / period + phase);
          break;
        case Texture::Noise:
        case Texture::Smooth:
          for (const auto& w : waves) {
            t += w[2] * std::sin(2 * kPi * (x * std::cos(w[0]) + y * std::sin(w[0])) / period + w[1]);
          }
          t /= std::sqrt(static_cast<double>(waves.size()) / 2.0);
          break;
        case Texture::Checker: {
          const int bx = static_cast<int>(std::floor((x + ox) / period));
          const int by = static_cast<int>(std::floor((y + oy) / period));
          t = ((bx + by) % 2 == 0) ? 1.0 : -1.0;
          break;
        }
      }
      for (int c = 0; c < 3; ++c) {
        const double noise = rng.uniform(-8, 8);
        const double v = std::round(gain * (color[c] + amplitude * t) + noise);
        img.data[(static_cast<std::size_t>(y) * size + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return img;
}

struct FixtureOptions {
  std::size_t per_class = 100;
  std::uint64_t seed = 2024;
  int size = 64;
  std::uint32_t embedding_dim = 512;
  std::uint64_t embedding_seed = 7;
  std::string backbone = "squeezenet";  // label written into the EMB1 header
  unsigned threads = 0;
};

struct FixtureResult {
  DatasetManifest manifest;
  EmbeddingStore store;
};

// Writes <root>/<Class>/<Class>_<i>.png for every class and returns the
// synthetic-backbone embeddings of all tiles.
inline FixtureResult generate_fixture(const std::filesystem::path& root, const FixtureOptions& opt) {
  require(opt.per_class >= 2, ErrorKind::Config, "fixture: need at least 2 images per class");
  const std::size_t total = kFixtureClasses.size() * opt.per_class;
  std::vector<std::string> ids(total);
  std::vector<std::vector<float>> vectors(total);
  const SyntheticBackbone backbone(opt.embedding_dim, opt.embedding_seed);
  for (const auto& name : kFixtureClasses) std::filesystem::create_directories(root / std::string(name));

  parallel_for(total, opt.threads, [&](std::size_t job) {
    const std::size_t label = job / opt.per_class, index = job % opt.per_class;
    const auto img = fixture_tile(label, index, opt.seed, opt.size);
    const std::string cls(kFixtureClasses[label]);
    ids[job] = cls + "/" + cls + "_" + std::to_string(index) + ".png";
    const auto png = encode_png(img);
    std::ofstream out(root / ids[job], std::ios::binary);
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "fixture: cannot write " + (root / ids[job]).string());
    vectors[job] = backbone.embed(img);
  });

  FixtureResult result;
  result.store = {opt.backbone, opt.embedding_dim, {}};
  for (std::size_t i = 0; i < total; ++i) result.store.insert(ids[i], std::move(vectors[i]));
  result.manifest = scan_dataset(root);
  return result;
}

// Embeds every image of a dataset with the synthetic backbone.
inline EmbeddingStore synthetic_embeddings(const DatasetManifest& manifest, std::uint32_t dim, std::uint64_t seed,
                                           std::string backbone, unsigned threads = 0) {
  const SyntheticBackbone model(dim, seed);
  std::vector<std::vector<float>> vectors(manifest.records.size());
  parallel_for(vectors.size(), threads, [&](std::size_t i) {
    const auto& id = manifest.records[i].id;
    try {
      vectors[i] = model.embed(load_image((manifest.root / id).string()));
    } catch (const Error& e) {
      throw Error(e.kind(), id + ": " + e.what());
    }
  });
  EmbeddingStore store{std::move(backbone), dim, {}};
  for (std::size_t i = 0; i < vectors.size(); ++i) store.insert(manifest.records[i].id, std::move(vectors[i]));
  return store;
}

}  // namespace finj
