#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "finj/dataset.hpp"
#include "finj/embeddings.hpp"
#include "finj/error.hpp"
#include "finj/feature_cache.hpp"
#include "finj/features.hpp"
#include "finj/model_io.hpp"
#include "finj/parallel.hpp"
#include "finj/trainer.hpp"

namespace finj {

struct FusedDataset {
  TrainData train;
  TrainData test;
  Eigen::Index cnn_dim = 0;
  Eigen::Index trad_dim = 0;
};

namespace detail {

inline std::string list_ids(const std::vector<std::string>& ids) {
  constexpr std::size_t kShown = 10;
  std::string out;
  for (std::size_t i = 0; i < std::min(ids.size(), kShown); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  if (ids.size() > kShown) out += " and " + std::to_string(ids.size() - kShown) + " more";
  return out;
}

inline TrainData fuse_rows(const std::vector<std::string>& ids, const std::map<std::string, int>& labels,
                           const EmbeddingStore& store, const FeatureCache& cache, FeatureSelection sel) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  TrainData d{Matrix(n, store.dim), Matrix(n, static_cast<Eigen::Index>(sel.width())), {}, ids};
  d.labels.reserve(ids.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& id = ids[static_cast<std::size_t>(r)];
    const auto& v = store.at(id);
    for (Eigen::Index c = 0; c < d.cnn.cols(); ++c) d.cnn(r, c) = static_cast<double>(v[static_cast<std::size_t>(c)]);
    const auto flat = cache.at(id).subset(sel).flat();
    for (Eigen::Index c = 0; c < d.trad.cols(); ++c) d.trad(r, c) = flat[static_cast<std::size_t>(c)];
    d.labels.push_back(labels.at(id));
  }
  return d;
}

}  // namespace detail

// Rows follow the split manifest order. Traditional features come from
// `cache` when given, otherwise they are extracted from the images.
inline FusedDataset build_fused_dataset(const SplitManifest& split, const DatasetManifest& manifest,
                                        const EmbeddingStore& store, FeatureSelection sel,
                                        const FeatureCache* cache = nullptr, unsigned threads = 0) {
  const auto labels = manifest.label_index();
  std::vector<std::string> all_ids = split.train_ids;
  all_ids.insert(all_ids.end(), split.test_ids.begin(), split.test_ids.end());

  std::vector<std::string> unknown, no_embedding, no_features;
  for (const auto& id : all_ids) {
    if (!labels.count(id)) unknown.push_back(id);
    if (!store.records.count(id)) no_embedding.push_back(id);
  }
  require(unknown.empty(), ErrorKind::Join,
          "split ids not in the dataset manifest: " + detail::list_ids(unknown));
  require(no_embedding.empty(), ErrorKind::Join,
          std::to_string(no_embedding.size()) + " ids missing from the " + store.backbone +
              " embeddings: " + detail::list_ids(no_embedding));

  FeatureCache computed;
  if (cache) {
    for (const auto& id : all_ids) {
      const auto it = cache->find(id);
      if (it == cache->end()) {
        no_features.push_back(id);
        continue;
      }
      const auto have = it->second.selection();
      for (auto g : sel.groups()) {
        require(have.contains(g), ErrorKind::Join,
                "feature cache entry " + id + " lacks group " + std::string(group_key(g)));
      }
    }
    require(no_features.empty(), ErrorKind::Join,
            std::to_string(no_features.size()) + " ids missing from the feature cache: " +
                detail::list_ids(no_features));
  } else if (!sel.empty()) {
    std::vector<std::string> missing_images;
    for (const auto& id : all_ids) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(manifest.root / id, ec)) missing_images.push_back(id);
    }
    require(missing_images.empty(), ErrorKind::Join,
            std::to_string(missing_images.size()) + " images missing under " + manifest.root.string() + ": " +
                detail::list_ids(missing_images));
    computed = compute_feature_cache(manifest.root, all_ids, sel, threads);
  } else {
    for (const auto& id : all_ids) computed.emplace(id, FeatureVector{});
  }
  const FeatureCache& source = cache ? *cache : computed;

  FusedDataset out;
  out.cnn_dim = store.dim;
  out.trad_dim = static_cast<Eigen::Index>(sel.width());
  out.train = detail::fuse_rows(split.train_ids, labels, store, source, sel);
  out.test = detail::fuse_rows(split.test_ids, labels, store, source, sel);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario comparison

struct ScenarioSpec {
  std::string name;
  FeatureSelection selection;
  std::string embeddings;  // key into CompareInputs::stores
};

struct CompareInputs {
  const DatasetManifest* manifest = nullptr;
  const SplitManifest* split = nullptr;
  std::map<std::string, EmbeddingStore> stores;
  const FeatureCache* cache = nullptr;  // extracted on demand when null
  unsigned threads = 0;
};

struct ScenarioResult {
  ScenarioSpec spec;
  std::string backbone;
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> runs;
  double mean_accuracy = 0;
  double max_accuracy = 0;
  std::string baseline;
  double delta_mean_vs_baseline = 0;
  double delta_max_vs_baseline = 0;
  std::size_t model_file_bytes = 0;
};

struct ComparisonReport {
  std::vector<ScenarioResult> scenarios;
  nlohmann::json config;
};

// Baseline plus the four injection scenarios, for one backbone.
inline std::vector<ScenarioSpec> default_scenarios(const std::string& embeddings, const std::string& backbone) {
  const auto base = display_name(backbone);
  return {
      {base, FeatureSelection::none(), embeddings},
      {base + " + GLCM features", FeatureSelection{FeatureGroup::GLCM}, embeddings},
      {base + " + color invariants", FeatureSelection{FeatureGroup::ColorInv}, embeddings},
      {base + " + Hu moments + HoG + LBP + sample mean",
       FeatureSelection{FeatureGroup::Hu, FeatureGroup::HOG, FeatureGroup::LBP, FeatureGroup::Mean}, embeddings},
      {base + " + all traditional features", FeatureSelection::all(), embeddings},
  };
}

inline ModelFile make_model_file(FusionHeadParams head, const std::string& backbone, FeatureSelection sel,
                                 const DatasetManifest& manifest, const SplitManifest& split, const TrainConfig& cfg) {
  ModelFile f;
  f.head = std::move(head);
  f.backbone = backbone;
  f.features = sel;
  f.classes = manifest.classes;
  f.train = cfg;
  f.extra = {{"split_seed", split.seed},
             {"split_ratio", split.train_ratio},
             {"split_generator", split.generator},
             {"train_rows", split.train_ids.size()},
             {"test_rows", split.test_ids.size()}};
  return f;
}

// Each scenario trains `repeats` heads with seeds seed+0 .. seed+repeats-1 on
// the same split. Deltas are taken against the first feature-free scenario
// that uses the same embeddings.
inline ComparisonReport compare_scenarios(const std::vector<ScenarioSpec>& specs, const CompareInputs& in,
                                          const TrainConfig& cfg) {
  cfg.validate();
  require(in.manifest && in.split, ErrorKind::Contract, "compare: dataset manifest and split are required");
  require(!specs.empty(), ErrorKind::Config, "compare: no scenarios given");

  std::set<std::string> names;
  std::vector<std::size_t> baseline_of(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    require(names.insert(specs[i].name).second, ErrorKind::Config, "compare: duplicate scenario name " + specs[i].name);
    require(in.stores.count(specs[i].embeddings), ErrorKind::Config,
            "compare: scenario " + specs[i].name + " references unknown embeddings " + specs[i].embeddings);
    std::size_t b = specs.size();
    for (std::size_t j = 0; j < specs.size() && b == specs.size(); ++j) {
      if (specs[j].selection.empty() && specs[j].embeddings == specs[i].embeddings) b = j;
    }
    require(b < specs.size(), ErrorKind::Config,
            "compare: no baseline scenario (empty feature selection) for embeddings " + specs[i].embeddings);
    baseline_of[i] = b;
  }

  // One extraction pass for the union of all selections; scenarios take subsets.
  FeatureCache computed;
  const FeatureCache* cache = in.cache;
  if (!cache) {
    FeatureSelection needed;
    for (const auto& s : specs)
      for (auto g : s.selection.groups()) needed.insert(g);
    if (!needed.empty()) {
      std::vector<std::string> ids = in.split->train_ids;
      ids.insert(ids.end(), in.split->test_ids.begin(), in.split->test_ids.end());
      computed = compute_feature_cache(in.manifest->root, ids, needed, in.threads);
    } else {
      for (const auto* ids : {&in.split->train_ids, &in.split->test_ids})
        for (const auto& id : *ids) computed.emplace(id, FeatureVector{});
    }
    cache = &computed;
  }

  std::vector<FusedDataset> fused;
  fused.reserve(specs.size());
  for (const auto& s : specs) {
    fused.push_back(build_fused_dataset(*in.split, *in.manifest, in.stores.at(s.embeddings), s.selection, cache));
  }

  const auto classes = static_cast<int>(in.manifest->classes.size());
  const auto repeats = static_cast<std::size_t>(cfg.repeats);
  std::vector<Metrics> metrics(specs.size() * repeats);
  std::vector<std::size_t> model_bytes(specs.size() * repeats);
  parallel_for(metrics.size(), in.threads, [&](std::size_t job) {
    const std::size_t s = job / repeats, k = job % repeats;
    TrainConfig run = cfg;
    run.seed = cfg.seed + k;
    auto trained = train_head(fused[s].train, run, classes);
    metrics[job] = evaluate(trained.head, fused[s].test);
    metrics[job].loss_history = trained.history.epoch_loss;
    const auto& store = in.stores.at(specs[s].embeddings);
    model_bytes[job] = serialize_model(make_model_file(std::move(trained.head), store.backbone, specs[s].selection,
                                                       *in.manifest, *in.split, run))
                           .size();
  });

  ComparisonReport report;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    ScenarioResult r;
    r.spec = specs[s];
    r.backbone = in.stores.at(specs[s].embeddings).backbone;
    double sum = 0;
    r.max_accuracy = 0;
    for (std::size_t k = 0; k < repeats; ++k) {
      const auto& m = metrics[s * repeats + k];
      r.seeds.push_back(cfg.seed + k);
      r.runs.push_back(m);
      sum += m.accuracy;
      r.max_accuracy = std::max(r.max_accuracy, m.accuracy);
      r.model_file_bytes = std::max(r.model_file_bytes, model_bytes[s * repeats + k]);
    }
    r.mean_accuracy = sum / static_cast<double>(repeats);
    report.scenarios.push_back(std::move(r));
  }
  for (std::size_t s = 0; s < specs.size(); ++s) {
    auto& r = report.scenarios[s];
    const auto& b = report.scenarios[baseline_of[s]];
    r.baseline = b.spec.name;
    r.delta_mean_vs_baseline = r.mean_accuracy - b.mean_accuracy;
    r.delta_max_vs_baseline = r.max_accuracy - b.max_accuracy;
  }
  report.config = {{"train", to_json(cfg)}, {"split", {{"seed", in.split->seed},
                                                      {"train_ratio", in.split->train_ratio},
                                                      {"generator", in.split->generator},
                                                      {"train_rows", in.split->train_ids.size()},
                                                      {"test_rows", in.split->test_ids.size()}}},
                   {"classes", in.manifest->classes}};
  return report;
}

inline nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.scenarios) {
    std::vector<double> acc;
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t k = 0; k < r.runs.size(); ++k) {
      acc.push_back(r.runs[k].accuracy);
      auto m = to_json(r.runs[k]);
      m["seed"] = r.seeds[k];
      runs.push_back(std::move(m));
    }
    rows.push_back({{"scenario", r.spec.name},
                    {"backbone", r.backbone},
                    {"embeddings", r.spec.embeddings},
                    {"features", r.spec.selection.to_string()},
                    {"repeats", r.runs.size()},
                    {"accuracies", acc},
                    {"mean_accuracy", r.mean_accuracy},
                    {"max_accuracy", r.max_accuracy},
                    {"baseline", r.baseline},
                    {"delta_mean_vs_baseline", r.delta_mean_vs_baseline},
                    {"delta_max_vs_baseline", r.delta_max_vs_baseline},
                    {"model_file_bytes", r.model_file_bytes},
                    {"runs", runs}});
  }
  return {{"config", report.config}, {"scenarios", rows}};
}

// Aligned plain-text table, one row per scenario.
inline std::string render_table(const ComparisonReport& report) {
  std::size_t width = std::string("Test Scenario").size();
  for (const auto& r : report.scenarios) width = std::max(width, r.spec.name.size());
  const auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  const auto number = [](const char* fmt, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, v);
    return std::string(buf);
  };
  std::string out = pad("Test Scenario", width) + "  Mean Accuracy  Maximum Accuracy  Delta (mean)  Model bytes\n";
  out += std::string(width, '-') + "  -------------  ----------------  ------------  -----------\n";
  for (const auto& r : report.scenarios) {
    out += pad(r.spec.name, width) + "  " + pad(number("%.4f", r.mean_accuracy), 13) + "  " +
           pad(number("%.4f", r.max_accuracy), 16) + "  " + pad(number("%+.4f", r.delta_mean_vs_baseline), 12) +
           "  " + std::to_string(r.model_file_bytes) + "\n";
  }
  return out;
}

}  // namespace finj
