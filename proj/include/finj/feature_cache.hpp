#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finj/codec.hpp"
#include "finj/dataset.hpp"
#include "finj/error.hpp"
#include "finj/features.hpp"
#include "finj/parallel.hpp"

namespace finj {

// Traditional features keyed by image id.
using FeatureCache = std::map<std::string, FeatureVector>;

// One JSON object per line: {"id": ..., "groups": {"mean": [...], ...}}.
// An optional first line {"finj_feature_cache": 1, "config": {...}} records
// how the cache was produced; readers skip it. nlohmann/json prints the
// shortest decimal that round-trips each double.
inline void write_feature_cache(std::ostream& out, const FeatureCache& cache,
                                const nlohmann::json& config = nullptr) {
  if (!config.is_null()) out << nlohmann::json{{"finj_feature_cache", 1}, {"config", config}}.dump() << '\n';
  for (const auto& [id, fv] : cache) {
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& seg : fv.segments) groups[std::string(group_key(seg.group))] = seg.values;
    out << nlohmann::json{{"id", id}, {"groups", groups}}.dump() << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "feature cache: write failed");
}

inline FeatureCache read_feature_cache(std::istream& in) {
  FeatureCache cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "feature cache line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, where + ": " + e.what());
    }
    if (line_no == 1 && j.is_object() && j.contains("finj_feature_cache")) continue;
    require(j.is_object() && j.contains("id") && j["id"].is_string() && j.contains("groups") &&
                j["groups"].is_object(),
            ErrorKind::Format, where + ": expected {\"id\": string, \"groups\": object}");
    FeatureVector fv;
    for (auto g : kCanonicalGroups) {
      const std::string key(group_key(g));
      if (!j["groups"].contains(key)) continue;
      const auto& arr = j["groups"][key];
      require(arr.is_array() && arr.size() == group_length(g), ErrorKind::Validation,
              where + ": group " + key + " must hold " + std::to_string(group_length(g)) + " numbers");
      FeatureSegment seg{g, {}};
      for (const auto& v : arr) {
        require(v.is_number(), ErrorKind::Validation, where + ": non-numeric value in " + key);
        seg.values.push_back(v.get<double>());
      }
      fv.segments.push_back(std::move(seg));
    }
    for (const auto& [key, _] : j["groups"].items()) {
      require(group_from_key(key).has_value(), ErrorKind::Validation, where + ": unknown group " + key);
    }
    const std::string id = j["id"].get<std::string>();
    require(cache.emplace(id, std::move(fv)).second, ErrorKind::Validation,
            where + ": duplicate id " + id);
  }
  return cache;
}

// Decodes and extracts features for `ids` on up to `threads` workers.
inline FeatureCache compute_feature_cache(const std::filesystem::path& root,
                                          const std::vector<std::string>& ids, FeatureSelection sel,
                                          unsigned threads = 0) {
  std::vector<FeatureVector> results(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    try {
      results[i] = extract_all(load_image((root / ids[i]).string()), sel);
    } catch (const Error& e) {
      throw Error(e.kind(), ids[i] + ": " + e.what());
    }
  });
  FeatureCache cache;
  for (std::size_t i = 0; i < ids.size(); ++i) cache.emplace(ids[i], std::move(results[i]));
  return cache;
}

}  // namespace finj
