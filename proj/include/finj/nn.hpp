#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finj/error.hpp"
#include "finj/rng.hpp"

namespace finj {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Mode { Train, Infer };

inline std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// ---------------------------------------------------------------------------
// Batch normalization

struct BatchNormParams {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double momentum = 0.99;
  double epsilon = 1e-5;

  static BatchNormParams identity(Eigen::Index dim) {
    return {Vector::Ones(dim), Vector::Zero(dim), Vector::Zero(dim), Vector::Ones(dim)};
  }

  Eigen::Index dim() const { return gamma.size(); }
};

struct BatchNormCache {
  Mode mode = Mode::Infer;
  Matrix xhat;
  Vector inv_std;
};

// Train mode normalizes by the batch mean and biased batch variance and
// folds them into the running statistics: running = momentum * running +
// (1 - momentum) * batch.
inline Matrix batchnorm_apply(BatchNormParams& p, const Matrix& x, Mode mode,
                              BatchNormCache* cache = nullptr) {
  require(x.cols() == p.dim(), ErrorKind::Contract,
          "batchnorm: input " + shape_of(x) + " does not match dim " + std::to_string(p.dim()));
  require(p.epsilon > 0, ErrorKind::Contract, "batchnorm: epsilon must be positive");
  Vector mean, var;
  if (mode == Mode::Train) {
    require(x.rows() >= 2, ErrorKind::Contract, "batchnorm: train mode needs a batch of at least 2 rows");
    mean = x.colwise().mean().transpose();
    var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    p.running_mean = p.momentum * p.running_mean + (1.0 - p.momentum) * mean;
    p.running_var = p.momentum * p.running_var + (1.0 - p.momentum) * var;
  } else {
    mean = p.running_mean;
    var = p.running_var;
  }
  const Vector inv_std = (var.array() + p.epsilon).rsqrt().matrix();
  Matrix xhat = (x.rowwise() - mean.transpose()) * inv_std.asDiagonal();
  Matrix y = (xhat * p.gamma.asDiagonal()).rowwise() + p.beta.transpose();
  if (cache) *cache = {mode, std::move(xhat), inv_std};
  return y;
}

struct BatchNormGrads {
  Vector gamma;
  Vector beta;
  Matrix input;
};

inline BatchNormGrads batchnorm_backward(const BatchNormParams& p, const BatchNormCache& c, const Matrix& dy) {
  require(dy.rows() == c.xhat.rows() && dy.cols() == c.xhat.cols(), ErrorKind::Contract,
          "batchnorm backward: gradient " + shape_of(dy) + " does not match cache " + shape_of(c.xhat));
  BatchNormGrads g;
  g.gamma = dy.cwiseProduct(c.xhat).colwise().sum().transpose();
  g.beta = dy.colwise().sum().transpose();
  const Matrix dxhat = dy * p.gamma.asDiagonal();
  if (c.mode == Mode::Infer) {
    g.input = dxhat * c.inv_std.asDiagonal();
    return g;
  }
  const double b = static_cast<double>(dy.rows());
  const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).colwise().sum();
  const Matrix centered =
      (b * dxhat).rowwise() - sum_dxhat - Matrix(c.xhat * sum_dxhat_xhat.asDiagonal());
  g.input = centered * (c.inv_std / b).asDiagonal();
  return g;
}

// ---------------------------------------------------------------------------
// Dense layer: out = x W^T + b

struct DenseParams {
  Matrix weights;  // out_dim x in_dim
  Vector bias;     // out_dim

  static DenseParams zeros(Eigen::Index in_dim, Eigen::Index out_dim) {
    return {Matrix::Zero(out_dim, in_dim), Vector::Zero(out_dim)};
  }

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

inline Matrix dense_forward(const DenseParams& p, const Matrix& x) {
  require(x.cols() == p.in_dim(), ErrorKind::Contract,
          "dense: input " + shape_of(x) + " does not match in_dim " + std::to_string(p.in_dim()));
  return (x * p.weights.transpose()).rowwise() + p.bias.transpose();
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy

inline Matrix softmax(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  return p.array().colwise() / p.rowwise().sum().array();
}

struct XentResult {
  double loss;
  Matrix dlogits;
};

inline XentResult softmax_xent(const Matrix& logits, const std::vector<int>& labels) {
  require(static_cast<Eigen::Index>(labels.size()) == logits.rows(), ErrorKind::Contract,
          "softmax_xent: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows()) +
              " rows");
  require(logits.rows() > 0, ErrorKind::Contract, "softmax_xent: empty batch");
  const Eigen::Index b = logits.rows();
  const Matrix shifted = logits.colwise() - logits.rowwise().maxCoeff();
  const Vector log_z = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix d = (shifted.colwise() - log_z).array().exp().matrix();
  double loss = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < logits.cols(), ErrorKind::Contract,
            "softmax_xent: label " + std::to_string(y) + " outside [0, " + std::to_string(logits.cols()) + ")");
    loss += log_z[i] - shifted(i, y);
    d(i, y) -= 1.0;
  }
  return {loss / static_cast<double>(b), d / static_cast<double>(b)};
}

// ---------------------------------------------------------------------------
// Fusion head: logits = output(relu(hidden(concat(bn(cnn), trad))))

struct FusionHeadParams {
  BatchNormParams cnn_bn;
  DenseParams hidden;
  DenseParams output;

  Eigen::Index cnn_dim() const { return cnn_bn.dim(); }
  Eigen::Index trad_dim() const { return hidden.in_dim() - cnn_bn.dim(); }
  Eigen::Index hidden_dim() const { return hidden.out_dim(); }
  Eigen::Index classes() const { return output.out_dim(); }

  // Zero weights, identity batchnorm.
  static FusionHeadParams zeros(Eigen::Index cnn_dim, Eigen::Index trad_dim, Eigen::Index hidden_dim,
                                Eigen::Index classes) {
    require(cnn_dim >= 1 && trad_dim >= 0 && hidden_dim >= 1 && classes >= 2, ErrorKind::Contract,
            "head: invalid dimensions");
    return {BatchNormParams::identity(cnn_dim), DenseParams::zeros(cnn_dim + trad_dim, hidden_dim),
            DenseParams::zeros(hidden_dim, classes)};
  }

  // Weights uniform on [-1/sqrt(in_dim), 1/sqrt(in_dim)), biases zero.
  static FusionHeadParams initialized(Eigen::Index cnn_dim, Eigen::Index trad_dim, Eigen::Index hidden_dim,
                                      Eigen::Index classes, SplitMix64& rng) {
    auto head = zeros(cnn_dim, trad_dim, hidden_dim, classes);
    for (DenseParams* layer : {&head.hidden, &head.output}) {
      const double a = 1.0 / std::sqrt(static_cast<double>(layer->in_dim()));
      for (Eigen::Index r = 0; r < layer->weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer->weights.cols(); ++c) layer->weights(r, c) = rng.uniform(-a, a);
    }
    return head;
  }
};

struct HeadCache {
  bool valid = false;
  BatchNormCache bn;
  Matrix fused;       // B x (cnn_dim + trad_dim)
  Matrix hidden_pre;  // B x hidden_dim
  Matrix hidden_act;  // relu(hidden_pre)
};

inline Matrix head_forward(FusionHeadParams& head, const Matrix& cnn, const Matrix& trad, Mode mode,
                           HeadCache* cache = nullptr) {
  require(cnn.cols() == head.cnn_dim(), ErrorKind::Contract,
          "head: cnn segment has width " + std::to_string(cnn.cols()) + ", head expects " +
              std::to_string(head.cnn_dim()));
  require(trad.cols() == head.trad_dim(), ErrorKind::Contract,
          "head: traditional segment has width " + std::to_string(trad.cols()) + ", head expects " +
              std::to_string(head.trad_dim()));
  require(cnn.rows() == trad.rows(), ErrorKind::Contract, "head: cnn and traditional row counts differ");
  HeadCache local;
  HeadCache& c = cache ? *cache : local;
  c.valid = false;
  Matrix fused(cnn.rows(), head.hidden.in_dim());
  fused.leftCols(head.cnn_dim()) = batchnorm_apply(head.cnn_bn, cnn, mode, &c.bn);
  fused.rightCols(head.trad_dim()) = trad;
  c.hidden_pre = dense_forward(head.hidden, fused);
  c.hidden_act = c.hidden_pre.cwiseMax(0.0);
  c.fused = std::move(fused);
  c.valid = cache != nullptr;
  return dense_forward(head.output, c.hidden_act);
}

// Inference that leaves the head untouched.
inline Matrix head_predict(const FusionHeadParams& head, const Matrix& cnn, const Matrix& trad) {
  auto copy = head;
  return head_forward(copy, cnn, trad, Mode::Infer);
}

struct HeadGrads {
  Vector bn_gamma;
  Vector bn_beta;
  DenseParams hidden;
  DenseParams output;
  Matrix cnn_input;
};

inline HeadGrads head_backward(const FusionHeadParams& head, const HeadCache& c, const Matrix& dlogits) {
  require(c.valid, ErrorKind::Contract, "head backward: cache does not come from a forward pass");
  require(dlogits.rows() == c.hidden_act.rows() && dlogits.cols() == head.classes(), ErrorKind::Contract,
          "head backward: gradient " + shape_of(dlogits) + " does not match the cached forward pass");
  require(c.fused.cols() == head.hidden.in_dim() && c.hidden_act.cols() == head.hidden_dim(),
          ErrorKind::Contract, "head backward: cache was produced by a head of different shape");
  HeadGrads g;
  g.output.weights = dlogits.transpose() * c.hidden_act;
  g.output.bias = dlogits.colwise().sum().transpose();
  const Matrix dact = dlogits * head.output.weights;
  const Matrix dpre = dact.cwiseProduct((c.hidden_pre.array() > 0.0).cast<double>().matrix());
  g.hidden.weights = dpre.transpose() * c.fused;
  g.hidden.bias = dpre.colwise().sum().transpose();
  const Matrix dfused = dpre * head.hidden.weights;
  auto bn = batchnorm_backward(head.cnn_bn, c.bn, dfused.leftCols(head.cnn_dim()));
  g.bn_gamma = std::move(bn.gamma);
  g.bn_beta = std::move(bn.beta);
  g.cnn_input = std::move(bn.input);
  return g;
}

// Trainable parameters as one flat vector: gamma, beta, hidden W (row-major),
// hidden b, output W (row-major), output b. Running statistics are state, not
// parameters, and are excluded.
inline Eigen::Index parameter_count(const FusionHeadParams& h) {
  return 2 * h.cnn_dim() + h.hidden.weights.size() + h.hidden.bias.size() + h.output.weights.size() +
         h.output.bias.size();
}

namespace detail {

template <typename Fn>
void visit_blocks(Fn&& fn, Vector& gamma, Vector& beta, Matrix& hw, Vector& hb, Matrix& ow, Vector& ob) {
  fn(gamma.data(), gamma.size(), 1, 1);
  fn(beta.data(), beta.size(), 1, 1);
  fn(hw.data(), hw.rows(), hw.cols(), 0);
  fn(hb.data(), hb.size(), 1, 1);
  fn(ow.data(), ow.rows(), ow.cols(), 0);
  fn(ob.data(), ob.size(), 1, 1);
}

// Copies between column-major Eigen storage and the row-major flat layout.
inline Vector flatten_blocks(Vector gamma, Vector beta, Matrix hw, Vector hb, Matrix ow, Vector ob) {
  std::vector<double> out;
  visit_blocks(
      [&](double* data, Eigen::Index rows, Eigen::Index cols, int is_vector) {
        if (is_vector) {
          out.insert(out.end(), data, data + rows);
          return;
        }
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) out.push_back(data[c * rows + r]);
      },
      gamma, beta, hw, hb, ow, ob);
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace detail

inline Vector flatten(const FusionHeadParams& h) {
  return detail::flatten_blocks(h.cnn_bn.gamma, h.cnn_bn.beta, h.hidden.weights, h.hidden.bias,
                                h.output.weights, h.output.bias);
}

inline Vector flatten(const HeadGrads& g) {
  return detail::flatten_blocks(g.bn_gamma, g.bn_beta, g.hidden.weights, g.hidden.bias, g.output.weights,
                                g.output.bias);
}

inline void unflatten(FusionHeadParams& h, const Vector& flat) {
  require(flat.size() == parameter_count(h), ErrorKind::Contract,
          "unflatten: expected " + std::to_string(parameter_count(h)) + " values, got " +
              std::to_string(flat.size()));
  Eigen::Index k = 0;
  detail::visit_blocks(
      [&](double* data, Eigen::Index rows, Eigen::Index cols, int is_vector) {
        if (is_vector) {
          for (Eigen::Index r = 0; r < rows; ++r) data[r] = flat[k++];
          return;
        }
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) data[c * rows + r] = flat[k++];
      },
      h.cnn_bn.gamma, h.cnn_bn.beta, h.hidden.weights, h.hidden.bias, h.output.weights, h.output.bias);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::uint64_t step = 0;
  Vector m;
  Vector v;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  static AdamState fresh(Eigen::Index n, double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-7) {
    return {0, Vector::Zero(n), Vector::Zero(n), lr, beta1, beta2, epsilon};
  }
};

// Bias-corrected update: p -= lr * m_hat / (sqrt(v_hat) + epsilon).
inline void adam_step(AdamState& s, Vector& params, const Vector& grads) {
  require(params.size() == grads.size() && s.m.size() == params.size() && s.v.size() == params.size(),
          ErrorKind::Contract,
          "adam: shape mismatch (params " + std::to_string(params.size()) + ", grads " +
              std::to_string(grads.size()) + ", state " + std::to_string(s.m.size()) + ")");
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.epsilon);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

// Max over coordinates of |a - n| / max(|a|, |n|, 1e-12), with n the central
// difference (f(p + h e_i) - f(p - h e_i)) / 2h.
inline double grad_check(const std::function<double(const Vector&)>& f, const Vector& analytic,
                         const Vector& point, double h) {
  require(h > 0, ErrorKind::Contract, "grad_check: step must be positive");
  require(analytic.size() == point.size(), ErrorKind::Contract, "grad_check: gradient and point differ in size");
  double worst = 0;
  Vector p = point;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = f(p);
    p[i] = saved - h;
    const double down = f(p);
    p[i] = saved;
    require(std::isfinite(up) && std::isfinite(down), ErrorKind::Check,
            "grad_check: non-finite function value at coordinate " + std::to_string(i));
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace finj
