#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "finj/dataset.hpp"
#include "finj/embeddings.hpp"
#include "finj/error.hpp"
#include "finj/feature_cache.hpp"
#include "finj/features.hpp"
#include "finj/model_io.hpp"
#include "finj/pipeline.hpp"
#include "finj/trainer.hpp"

namespace finj::cli {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

struct Options {
  std::string data;
  std::string embeddings;
  std::string features = "all";
  std::string out;
  std::string cache;
  std::string model;
  std::string backbone;
  std::string scenarios;
  std::string table;
  TrainConfig train;
  double split_ratio = 0.8;
  std::optional<std::uint64_t> split_seed;
  unsigned threads = 0;
};

inline EmbeddingStore load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open embeddings file " + path);
  try {
    return read_embeddings(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

inline FeatureCache load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open feature cache " + path);
  return read_feature_cache(in);
}

inline nlohmann::json dataset_json(const DatasetManifest& m) {
  return {{"root", m.root.generic_string()},
          {"classes", m.classes},
          {"images", m.records.size()},
          {"skipped_files", m.skipped_files}};
}

inline nlohmann::json split_json(const SplitManifest& s) {
  return {{"seed", s.seed},
          {"train_ratio", s.train_ratio},
          {"generator", s.generator},
          {"train_rows", s.train_ids.size()},
          {"test_rows", s.test_ids.size()}};
}

inline std::string pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline int run_extract(const Options& o, std::ostream& out) {
  const auto sel = FeatureSelection::parse(o.features);
  const auto manifest = scan_dataset(o.data);
  std::vector<std::string> ids;
  for (const auto& r : manifest.records) ids.push_back(r.id);
  const auto cache = compute_feature_cache(manifest.root, ids, sel, o.threads);
  std::ostringstream text;
  write_feature_cache(text, cache, {{"command", "extract"}, {"dataset", dataset_json(manifest)},
                                    {"features", sel.to_string()}, {"width", sel.width()}});
  write_text_file(o.out, text.str());
  out << "extracted " << sel.to_string() << " (" << sel.width() << " values) for " << ids.size() << " images -> "
      << o.out << "\n";
  return kOk;
}

inline int run_export_check(const Options& o, std::ostream& out) {
  const auto& spec = backbone_spec(o.backbone);
  const auto store = load_embeddings(o.embeddings);
  const auto report = check_backbone(store, spec);
  const nlohmann::json j = {{"command", "export-check"},
                            {"embeddings", o.embeddings},
                            {"backbone", report.backbone},
                            {"store_backbone", store.backbone},
                            {"dim", report.dim},
                            {"expected_dim", report.expected_dim},
                            {"records", report.records},
                            {"model_size_mb", spec.model_size_mb},
                            {"param_count", spec.param_count},
                            {"status", "pass"}};
  if (!o.out.empty()) write_text_file(o.out, pretty(j));
  out << pretty(j);
  return kOk;
}

inline int run_train(const Options& o, std::ostream& out) {
  o.train.validate();
  const auto sel = FeatureSelection::parse(o.features);
  const auto manifest = scan_dataset(o.data);
  const auto split = split_dataset(manifest, o.split_ratio, o.split_seed.value_or(o.train.seed));
  const auto store = load_embeddings(o.embeddings);
  FeatureCache cache;
  if (!o.cache.empty()) cache = load_cache(o.cache);
  const auto fused = build_fused_dataset(split, manifest, store, sel, o.cache.empty() ? nullptr : &cache, o.threads);
  auto trained = train_head(fused.train, o.train, static_cast<int>(manifest.classes.size()));
  const auto test_metrics = evaluate(trained.head, fused.test);
  auto file = make_model_file(std::move(trained.head), store.backbone, sel, manifest, split, o.train);
  file.extra["dataset"] = dataset_json(manifest);
  file.extra["embeddings"] = o.embeddings;
  file.extra["loss_history"] = trained.history.epoch_loss;
  const auto text = serialize_model(file);
  write_text_file(o.out, text);
  out << "trained " << display_name(store.backbone) << " + " << sel.to_string() << ": test accuracy "
      << test_metrics.accuracy << ", model " << text.size() << " bytes -> " << o.out << "\n";
  return kOk;
}

inline int run_eval(const Options& o, std::ostream& out) {
  const auto model = parse_model(read_text_file(o.model));
  const auto manifest = scan_dataset(o.data);
  const auto& prov = model.extra;
  require(prov.contains("split_seed") && prov.contains("split_ratio"), ErrorKind::Validation,
          "model file lacks split provenance");
  const auto split = split_dataset(manifest, prov["split_ratio"].get<double>(), prov["split_seed"].get<std::uint64_t>());
  require(model.classes.empty() || model.classes == manifest.classes, ErrorKind::Validation,
          "dataset classes differ from the classes the model was trained on");
  const auto store = load_embeddings(o.embeddings);
  require(store.dim == model.head.cnn_dim(), ErrorKind::Validation,
          "embeddings dim " + std::to_string(store.dim) + " does not match the model's " +
              std::to_string(model.head.cnn_dim()));
  FeatureCache cache;
  if (!o.cache.empty()) cache = load_cache(o.cache);
  const auto fused =
      build_fused_dataset(split, manifest, store, model.features, o.cache.empty() ? nullptr : &cache, o.threads);
  auto metrics = evaluate(model.head, fused.test);
  if (prov.contains("loss_history")) metrics.loss_history = prov["loss_history"].get<std::vector<double>>();
  auto j = to_json(metrics);
  j["config"] = {{"command", "eval"},
                 {"model", o.model},
                 {"embeddings", o.embeddings},
                 {"backbone", model.backbone},
                 {"features", model.features.to_string()},
                 {"train", to_json(model.train)},
                 {"split", split_json(split)},
                 {"dataset", dataset_json(manifest)}};
  write_text_file(o.out, pretty(j));
  out << "test accuracy " << metrics.accuracy << " on " << fused.test.rows() << " images -> " << o.out << "\n";
  return kOk;
}

// Scenario file: [{"name": ..., "features": "glcm,hog" | "all" | "none", "embeddings": path}, ...].
// A missing "embeddings" falls back to --embeddings.
inline std::vector<ScenarioSpec> load_scenarios(const std::string& path, const std::string& default_embeddings) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, "scenario file " + path + ": " + e.what());
  }
  require(j.is_array() && !j.empty(), ErrorKind::Config, "scenario file " + path + " must hold a non-empty JSON list");
  std::vector<ScenarioSpec> specs;
  for (const auto& s : j) {
    require(s.is_object() && s.contains("name") && s["name"].is_string(), ErrorKind::Config,
            "scenario file " + path + ": every entry needs a string \"name\"");
    ScenarioSpec spec;
    spec.name = s["name"].get<std::string>();
    spec.selection = FeatureSelection::parse(s.value("features", std::string("none")));
    spec.embeddings = s.value("embeddings", default_embeddings);
    require(!spec.embeddings.empty(), ErrorKind::Config, "scenario " + spec.name + " names no embeddings file");
    specs.push_back(std::move(spec));
  }
  return specs;
}

inline int run_compare(const Options& o, std::ostream& out) {
  o.train.validate();
  const auto manifest = scan_dataset(o.data);
  const auto split = split_dataset(manifest, o.split_ratio, o.split_seed.value_or(o.train.seed));

  CompareInputs in;
  in.manifest = &manifest;
  in.split = &split;
  in.threads = o.threads;
  std::vector<ScenarioSpec> specs;
  if (o.scenarios.empty()) {
    require(!o.embeddings.empty(), ErrorKind::Config, "compare needs --embeddings or --scenarios");
    in.stores.emplace(o.embeddings, load_embeddings(o.embeddings));
    specs = default_scenarios(o.embeddings, in.stores.at(o.embeddings).backbone);
  } else {
    specs = load_scenarios(o.scenarios, o.embeddings);
    for (const auto& s : specs) {
      if (!in.stores.count(s.embeddings)) in.stores.emplace(s.embeddings, load_embeddings(s.embeddings));
    }
  }
  FeatureCache cache;
  if (!o.cache.empty()) {
    cache = load_cache(o.cache);
    in.cache = &cache;
  }

  const auto report = compare_scenarios(specs, in, o.train);
  auto j = to_json(report);
  j["config"]["command"] = "compare";
  j["config"]["dataset"] = dataset_json(manifest);
  j["config"]["scenario_file"] = o.scenarios;
  nlohmann::json stores = nlohmann::json::object();
  for (const auto& [path, store] : in.stores) {
    stores[path] = {{"backbone", store.backbone}, {"dim", store.dim}, {"records", store.records.size()}};
  }
  j["config"]["embeddings"] = stores;
  write_text_file(o.out, pretty(j));
  const auto table = render_table(report);
  const std::string table_path = o.table.empty() ? fs::path(o.out).replace_extension(".txt").string() : o.table;
  write_text_file(table_path, table);
  out << table;
  return kOk;
}

inline void add_train_flags(CLI::App* cmd, Options& o, bool with_repeats) {
  cmd->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch", o.train.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--lr", o.train.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--seed", o.train.seed, "Seed for the split, initialization and shuffling")->capture_default_str();
  cmd->add_option("--hidden", o.train.hidden, "Hidden layer width")->capture_default_str();
  cmd->add_option("--split-ratio", o.split_ratio, "Fraction of each class used for training")->capture_default_str();
  cmd->add_option("--split-seed", o.split_seed, "Seed for the split (default: --seed)");
  if (with_repeats) cmd->add_option("--repeats", o.train.repeats, "Trainings per scenario")->capture_default_str();
}

// Parses `args` (without the program name), runs the command and returns the
// exit code. Failures are reported on `err` as one JSON line.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Traditional-feature injection for land-cover classification", "finj"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  auto* extract = app.add_subcommand("extract", "Extract traditional features into a cache file");
  extract->add_option("--data", o.data, "Dataset root (one folder per class)")->required();
  extract->add_option("--features", o.features, "mean,glcm,hu,lbp,hog,colorinv | all | none")->capture_default_str();
  extract->add_option("--out", o.out, "Output feature cache (JSON lines)")->required();
  extract->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* check = app.add_subcommand("export-check", "Validate an EMB1 file against a backbone");
  check->add_option("--embeddings", o.embeddings, "EMB1 file")->required();
  check->add_option("--backbone", o.backbone, "squeezenet | mobilenetv2 | shufflenetv2 | vgg16 | resnet50v2")
      ->required();
  check->add_option("--out", o.out, "Optional report file");

  auto* train = app.add_subcommand("train", "Train a fusion head and write a model file");
  train->add_option("--data", o.data, "Dataset root")->required();
  train->add_option("--embeddings", o.embeddings, "EMB1 file")->required();
  train->add_option("--features", o.features, "Traditional feature groups")->capture_default_str();
  train->add_option("--cache", o.cache, "Feature cache from `extract`");
  train->add_option("--out", o.out, "Output model file")->required();
  train->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  add_train_flags(train, o, false);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on its test partition");
  eval->add_option("--data", o.data, "Dataset root")->required();
  eval->add_option("--embeddings", o.embeddings, "EMB1 file")->required();
  eval->add_option("--model", o.model, "Model file from `train`")->required();
  eval->add_option("--cache", o.cache, "Feature cache from `extract`");
  eval->add_option("--out", o.out, "Output metrics file")->required();
  eval->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* compare = app.add_subcommand("compare", "Compare scenarios and write a report and table");
  compare->add_option("--data", o.data, "Dataset root")->required();
  compare->add_option("--embeddings", o.embeddings, "EMB1 file for the default scenarios");
  compare->add_option("--scenarios", o.scenarios, "Scenario file: JSON list of {name, features, embeddings}");
  compare->add_option("--cache", o.cache, "Feature cache from `extract`");
  compare->add_option("--out", o.out, "Output report JSON")->required();
  compare->add_option("--table", o.table, "Output text table (default: report path with .txt)");
  compare->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  add_train_flags(compare, o, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "finj: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*extract) return run_extract(o, out);
    if (*check) return run_export_check(o, out);
    if (*train) return run_train(o, out);
    if (*eval) return run_eval(o, out);
    if (*compare) return run_compare(o, out);
  } catch (const Error& e) {
    err << nlohmann::json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace finj::cli
