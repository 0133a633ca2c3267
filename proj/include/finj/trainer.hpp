#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "finj/error.hpp"
#include "finj/nn.hpp"
#include "finj/rng.hpp"

namespace finj {

struct TrainConfig {
  int epochs = 16;
  int batch_size = 64;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 42;
  int repeats = 5;
  int hidden = 32;

  void validate() const {
    require(epochs >= 1, ErrorKind::Config, "epochs must be at least 1");
    require(batch_size >= 2, ErrorKind::Config, "batch size must be at least 2 (batchnorm needs two rows)");
    require(lr > 0, ErrorKind::Config, "learning rate must be positive");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorKind::Config, "Adam betas must lie in [0, 1)");
    require(epsilon >= 0, ErrorKind::Config, "Adam epsilon must be non-negative");
    require(repeats >= 1, ErrorKind::Config, "repeats must be at least 1");
    require(hidden >= 1, ErrorKind::Config, "hidden width must be at least 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr},     {"beta1", c.beta1},
          {"beta2", c.beta2},   {"epsilon", c.epsilon},       {"seed", c.seed}, {"repeats", c.repeats},
          {"hidden", c.hidden}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.repeats = j.at("repeats").get<int>();
    c.hidden = j.at("hidden").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("training config: ") + e.what());
  }
  return c;
}

// One partition of fused inputs: the CNN block, the traditional block and labels, row-aligned.
struct TrainData {
  Matrix cnn;
  Matrix trad;
  std::vector<int> labels;
  std::vector<std::string> ids;

  Eigen::Index rows() const { return cnn.rows(); }

  void check() const {
    require(cnn.rows() == trad.rows() && static_cast<std::size_t>(cnn.rows()) == labels.size(),
            ErrorKind::Contract, "fused data: block row counts and label count disagree");
  }
};

struct TrainHistory {
  std::vector<double> epoch_loss;
};

struct TrainResult {
  FusionHeadParams head;
  TrainHistory history;
};

// Row batches for one epoch. A trailing batch of a single row cannot be
// batch-normalized, so it joins the batch before it.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> epoch_batches(Eigen::Index rows, Eigen::Index batch) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (Eigen::Index start = 0; start < rows; start += batch) {
    Eigen::Index end = std::min(rows, start + batch);
    if (rows - end == 1) end = rows;
    out.emplace_back(start, end);
    if (end == rows) break;
  }
  return out;
}

inline TrainResult train_head(const TrainData& data, const TrainConfig& cfg, int classes) {
  cfg.validate();
  data.check();
  require(data.rows() >= cfg.batch_size, ErrorKind::Config,
          "training needs at least one full batch: " + std::to_string(data.rows()) + " rows, batch size " +
              std::to_string(cfg.batch_size));
  for (int y : data.labels) {
    require(y >= 0 && y < classes, ErrorKind::Contract, "training label " + std::to_string(y) + " out of range");
  }

  SplitMix64 rng(cfg.seed);
  TrainResult result{FusionHeadParams::initialized(data.cnn.cols(), data.trad.cols(), cfg.hidden, classes, rng), {}};
  auto& head = result.head;
  auto adam = AdamState::fresh(parameter_count(head), cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);
  Vector params = flatten(head);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batches = epoch_batches(data.rows(), cfg.batch_size);
  HeadCache cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span(order), rng);
    double total = 0;
    for (const auto& [start, end] : batches) {
      const std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + end);
      const Matrix cnn = data.cnn(rows, Eigen::all);
      const Matrix trad = data.trad(rows, Eigen::all);
      std::vector<int> labels;
      labels.reserve(rows.size());
      for (auto r : rows) labels.push_back(data.labels[static_cast<std::size_t>(r)]);

      const auto xent = softmax_xent(head_forward(head, cnn, trad, Mode::Train, &cache), labels);
      const auto grads = head_backward(head, cache, xent.dlogits);
      adam_step(adam, params, flatten(grads));
      unflatten(head, params);
      total += xent.loss * static_cast<double>(rows.size());
    }
    result.history.epoch_loss.push_back(total / static_cast<double>(data.rows()));
  }
  return result;
}

struct Metrics {
  double accuracy = 0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
  std::vector<double> loss_history;
};

// Index of the largest entry; ties go to the lowest index.
inline int argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = c;
  }
  return static_cast<int>(best);
}

inline Metrics evaluate(const FusionHeadParams& head, const TrainData& data) {
  data.check();
  const Matrix logits = head_predict(head, data.cnn, data.trad);
  const auto k = static_cast<std::size_t>(head.classes());
  Metrics m;
  m.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  std::int64_t correct = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const int y = data.labels[static_cast<std::size_t>(r)];
    require(y >= 0 && static_cast<std::size_t>(y) < k, ErrorKind::Contract,
            "evaluation label " + std::to_string(y) + " out of range");
    const int p = argmax_row(logits, r);
    ++m.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
    correct += (p == y);
  }
  m.accuracy = data.rows() > 0 ? static_cast<double>(correct) / static_cast<double>(data.rows()) : 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto n = std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::int64_t{0});
    m.per_class_accuracy.push_back(n > 0 ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(n) : 0.0);
  }
  return m;
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"per_class_accuracy", m.per_class_accuracy},
          {"confusion", m.confusion},
          {"loss_history", m.loss_history}};
}

}  // namespace finj
