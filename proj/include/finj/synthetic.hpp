#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "finj/error.hpp"
#include "finj/image.hpp"
#include "finj/rng.hpp"

namespace finj {

// Stand-in for a frozen CNN: relu(W x) where x is the image flattened to
// interleaved RGB in [0, 1] and W is a seeded dim x (w*h*3) random matrix.
// Entry (k, i) is drawn from the counter-based stream at index k*n + i, so the
// projection depends only on (dim, seed, input length).
class SyntheticBackbone {
 public:
  SyntheticBackbone(std::uint32_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    require(dim >= 1, ErrorKind::Contract, "synthetic backbone: dim must be at least 1");
  }

  std::uint32_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<float> embed(const ImageRGB& img) const {
    const auto& w = projection(img.data.size());
    Eigen::VectorXf x(static_cast<Eigen::Index>(img.data.size()));
    for (std::size_t i = 0; i < img.data.size(); ++i) x[static_cast<Eigen::Index>(i)] = img.data[i] / 255.0f;
    const Eigen::VectorXf y = (w * x).cwiseMax(0.0f);
    return {y.data(), y.data() + y.size()};
  }

 private:
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  const Matrix& projection(std::size_t n) const {
    std::lock_guard lock(mutex_);
    auto& slot = cache_[n];
    if (!slot) {
      // Uniform on [-sqrt(3/n), sqrt(3/n)): unit-variance rows.
      const double scale = std::sqrt(3.0 / static_cast<double>(n));
      slot = std::make_unique<Matrix>(dim_, static_cast<Eigen::Index>(n));
      auto* out = slot->data();
      const std::size_t total = static_cast<std::size_t>(dim_) * n;
      for (std::size_t k = 0; k < total; ++k) {
        const double u = static_cast<double>(SplitMix64::at(seed_, k) >> 11) * 0x1.0p-53;
        out[k] = static_cast<float>((2.0 * u - 1.0) * scale);
      }
    }
    return *slot;
  }

  std::uint32_t dim_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::unique_ptr<Matrix>> cache_;
};

inline std::vector<float> synthetic_backbone(const ImageRGB& img, std::uint32_t dim, std::uint64_t seed) {
  return SyntheticBackbone(dim, seed).embed(img);
}

}  // namespace finj
