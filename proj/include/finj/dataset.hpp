#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "finj/error.hpp"
#include "finj/rng.hpp"

namespace finj {

struct DatasetRecord {
  std::string id;  // path relative to the dataset root, '/'-separated
  int label = 0;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> classes;  // sorted lexicographically
  std::vector<DatasetRecord> records;  // sorted by id
  std::size_t skipped_files = 0;

  std::map<std::string, int> label_index() const {
    std::map<std::string, int> index;
    for (const auto& r : records) index.emplace(r.id, r.label);
    return index;
  }
};

struct SplitManifest {
  std::uint64_t seed = 0;
  double train_ratio = 0.8;
  std::string generator{SplitMix64::kName};
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

// One subdirectory per class under `root`, each holding image files.
// Non-image files are skipped and counted.
inline DatasetManifest scan_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  require(fs::is_directory(root, ec), ErrorKind::Ingest,
          "dataset root is not a directory: " + root.string());

  DatasetManifest manifest;
  manifest.root = root;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) manifest.classes.push_back(entry.path().filename().string());
  }
  std::sort(manifest.classes.begin(), manifest.classes.end());
  require(!manifest.classes.empty(), ErrorKind::Ingest,
          "dataset root has no class subdirectories: " + root.string());

  for (std::size_t label = 0; label < manifest.classes.size(); ++label) {
    const fs::path class_dir = root / manifest.classes[label];
    for (const auto& entry : fs::recursive_directory_iterator(class_dir)) {
      if (!entry.is_regular_file()) continue;
      if (!has_image_extension(entry.path())) {
        ++manifest.skipped_files;
        continue;
      }
      manifest.records.push_back(
          {fs::relative(entry.path(), root).generic_string(), static_cast<int>(label)});
    }
  }
  std::sort(manifest.records.begin(), manifest.records.end(),
            [](const DatasetRecord& a, const DatasetRecord& b) { return a.id < b.id; });
  return manifest;
}

// Stratified split: within each class (in label order) ids are shuffled by
// one SplitMix64 stream and the first floor(ratio * n) go to train.
inline SplitManifest split_dataset(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::Split, "split ratio must lie in (0, 1)");

  std::vector<std::vector<std::string>> by_class(manifest.classes.size());
  for (const auto& r : manifest.records) {
    require(r.label >= 0 && static_cast<std::size_t>(r.label) < by_class.size(), ErrorKind::Split,
            "record " + r.id + " has an out-of-range label");
    by_class[r.label].push_back(r.id);
  }

  SplitManifest split;
  split.seed = seed;
  split.train_ratio = ratio;
  SplitMix64 rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& ids = by_class[c];
    require(ids.size() >= 2, ErrorKind::Split,
            "class " + manifest.classes[c] + " has fewer than 2 images");
    std::sort(ids.begin(), ids.end());
    shuffle(std::span<std::string>(ids), rng);
    // The epsilon absorbs binary representation error, e.g. 0.29 * 100.
    const auto n_train = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(ids.size()) + 1e-9));
    split.train_ids.insert(split.train_ids.end(), ids.begin(), ids.begin() + n_train);
    split.test_ids.insert(split.test_ids.end(), ids.begin() + n_train, ids.end());
  }
  return split;
}

inline nlohmann::json to_json(const SplitManifest& split) {
  return {{"seed", split.seed},
          {"train_ratio", split.train_ratio},
          {"generator", split.generator},
          {"train", split.train_ids},
          {"test", split.test_ids}};
}

inline SplitManifest split_from_json(const nlohmann::json& j) {
  try {
    SplitManifest split;
    split.seed = j.at("seed").get<std::uint64_t>();
    split.train_ratio = j.at("train_ratio").get<double>();
    split.generator = j.at("generator").get<std::string>();
    split.train_ids = j.at("train").get<std::vector<std::string>>();
    split.test_ids = j.at("test").get<std::vector<std::string>>();
    std::set<std::string> seen;
    for (const auto* ids : {&split.train_ids, &split.test_ids}) {
      for (const auto& id : *ids) {
        require(seen.insert(id).second, ErrorKind::Validation, "split lists id twice: " + id);
      }
    }
    return split;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("split manifest: ") + e.what());
  }
}

}  // namespace finj
