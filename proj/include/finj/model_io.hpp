#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finj/error.hpp"
#include "finj/features.hpp"
#include "finj/nn.hpp"
#include "finj/trainer.hpp"

namespace finj {

// A trained head plus everything needed to reuse it.
struct ModelFile {
  FusionHeadParams head;
  std::string backbone;
  FeatureSelection features;
  std::vector<std::string> classes;
  TrainConfig train;
  nlohmann::json extra = nlohmann::json::object();  // split and dataset provenance
};

namespace detail {

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Vector vector_from(const nlohmann::json& j, Eigen::Index n, const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == n, ErrorKind::Validation,
          "model: " + what + " must hold " + std::to_string(n) + " values");
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = j[static_cast<std::size_t>(i)];
    require(x.is_number(), ErrorKind::Validation, "model: " + what + " holds a non-number");
    v[i] = x.get<double>();
    require(std::isfinite(v[i]), ErrorKind::Validation, "model: " + what + " holds a non-finite value");
  }
  return v;
}

inline Matrix matrix_from(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == rows, ErrorKind::Validation,
          "model: " + what + " must have " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    m.row(r) = vector_from(j[static_cast<std::size_t>(r)], cols, what + " row").transpose();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json model_json(const ModelFile& f) {
  const auto& h = f.head;
  return {
      {"format", "finj-model"},
      {"version", 1},
      {"backbone", f.backbone},
      {"features", f.features.to_string()},
      {"classes", f.classes},
      {"dims",
       {{"cnn", h.cnn_dim()}, {"trad", h.trad_dim()}, {"hidden", h.hidden_dim()}, {"classes", h.classes()}}},
      {"train_config", to_json(f.train)},
      {"provenance", f.extra},
      {"batchnorm",
       {{"gamma", detail::vector_json(h.cnn_bn.gamma)},
        {"beta", detail::vector_json(h.cnn_bn.beta)},
        {"running_mean", detail::vector_json(h.cnn_bn.running_mean)},
        {"running_var", detail::vector_json(h.cnn_bn.running_var)},
        {"momentum", h.cnn_bn.momentum},
        {"epsilon", h.cnn_bn.epsilon}}},
      {"hidden", {{"weights", detail::matrix_json(h.hidden.weights)}, {"bias", detail::vector_json(h.hidden.bias)}}},
      {"output", {{"weights", detail::matrix_json(h.output.weights)}, {"bias", detail::vector_json(h.output.bias)}}},
  };
}

// Compact JSON whose "file_bytes" field equals the length of the text itself.
// Doubles are printed as the shortest decimal that parses back to the same value.
inline std::string serialize_model(const ModelFile& f) {
  auto j = model_json(f);
  std::size_t claimed = 0;
  for (;;) {
    j["file_bytes"] = claimed;
    auto text = j.dump() + "\n";
    if (text.size() == claimed) return text;
    claimed = text.size();
  }
}

inline ModelFile parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("model: ") + e.what());
  }
  require(j.is_object() && j.value("format", "") == "finj-model", ErrorKind::Format, "model: not a finj model file");
  require(j.value("version", 0) == 1, ErrorKind::Format, "model: unsupported version");
  ModelFile f;
  try {
    const auto& d = j.at("dims");
    const Eigen::Index cnn = d.at("cnn").get<Eigen::Index>();
    const Eigen::Index trad = d.at("trad").get<Eigen::Index>();
    const Eigen::Index hidden = d.at("hidden").get<Eigen::Index>();
    const Eigen::Index classes = d.at("classes").get<Eigen::Index>();
    f.head = FusionHeadParams::zeros(cnn, trad, hidden, classes);
    const auto& bn = j.at("batchnorm");
    f.head.cnn_bn.gamma = detail::vector_from(bn.at("gamma"), cnn, "batchnorm gamma");
    f.head.cnn_bn.beta = detail::vector_from(bn.at("beta"), cnn, "batchnorm beta");
    f.head.cnn_bn.running_mean = detail::vector_from(bn.at("running_mean"), cnn, "batchnorm running_mean");
    f.head.cnn_bn.running_var = detail::vector_from(bn.at("running_var"), cnn, "batchnorm running_var");
    f.head.cnn_bn.momentum = bn.at("momentum").get<double>();
    f.head.cnn_bn.epsilon = bn.at("epsilon").get<double>();
    require((f.head.cnn_bn.running_var.array() >= 0).all() && f.head.cnn_bn.epsilon > 0, ErrorKind::Validation,
            "model: batchnorm variance must be non-negative and epsilon positive");
    f.head.hidden.weights = detail::matrix_from(j.at("hidden").at("weights"), hidden, cnn + trad, "hidden weights");
    f.head.hidden.bias = detail::vector_from(j.at("hidden").at("bias"), hidden, "hidden bias");
    f.head.output.weights = detail::matrix_from(j.at("output").at("weights"), classes, hidden, "output weights");
    f.head.output.bias = detail::vector_from(j.at("output").at("bias"), classes, "output bias");
    f.backbone = j.at("backbone").get<std::string>();
    f.features = FeatureSelection::parse(j.at("features").get<std::string>());
    f.classes = j.at("classes").get<std::vector<std::string>>();
    f.train = train_config_from_json(j.at("train_config"));
    f.extra = j.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("model: ") + e.what());
  }
  require(static_cast<Eigen::Index>(f.features.width()) == f.head.trad_dim(), ErrorKind::Validation,
          "model: feature selection width does not match the traditional input width");
  require(f.classes.empty() || static_cast<Eigen::Index>(f.classes.size()) == f.head.classes(),
          ErrorKind::Validation, "model: class list does not match the output width");
  return f;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace finj
