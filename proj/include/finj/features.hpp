#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "finj/error.hpp"
#include "finj/image.hpp"

namespace finj {

enum class FeatureGroup : int { Mean = 0, GLCM, Hu, LBP, HOG, ColorInv };

inline constexpr std::size_t kGroupCount = 6;
inline constexpr std::array<FeatureGroup, kGroupCount> kCanonicalGroups = {
    FeatureGroup::Mean, FeatureGroup::GLCM, FeatureGroup::Hu,
    FeatureGroup::LBP,  FeatureGroup::HOG,  FeatureGroup::ColorInv};

inline constexpr std::size_t group_length(FeatureGroup g) {
  constexpr std::array<std::size_t, kGroupCount> lengths = {3, 5, 7, 64, 64, 64};
  return lengths[static_cast<int>(g)];
}

// Stable lowercase keys, shared by the CLI and the feature cache.
inline constexpr std::string_view group_key(FeatureGroup g) {
  constexpr std::array<std::string_view, kGroupCount> keys = {"mean", "glcm", "hu",
                                                              "lbp",  "hog",  "colorinv"};
  return keys[static_cast<int>(g)];
}

inline std::optional<FeatureGroup> group_from_key(std::string_view key) {
  for (auto g : kCanonicalGroups) {
    if (group_key(g) == key) return g;
  }
  return std::nullopt;
}

class FeatureSelection {
 public:
  constexpr FeatureSelection() = default;
  constexpr FeatureSelection(std::initializer_list<FeatureGroup> groups) {
    for (auto g : groups) insert(g);
  }

  static constexpr FeatureSelection none() { return {}; }
  static constexpr FeatureSelection all() {
    FeatureSelection s;
    s.mask_ = (1u << kGroupCount) - 1;
    return s;
  }

  // Accepts "all", "none", "" or a comma list of group keys in any order.
  static FeatureSelection parse(std::string_view text) {
    if (text == "all") return all();
    if (text == "none" || text.empty()) return none();
    FeatureSelection s;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = std::min(text.find(',', pos), text.size());
      const auto token = text.substr(pos, comma - pos);
      const auto g = group_from_key(token);
      require(g.has_value(), ErrorKind::Config,
              "unknown feature group '" + std::string(token) +
                  "' (expected mean,glcm,hu,lbp,hog,colorinv, all or none)");
      s.insert(*g);
      pos = comma + 1;
    }
    return s;
  }

  constexpr void insert(FeatureGroup g) { mask_ |= 1u << static_cast<int>(g); }
  constexpr bool contains(FeatureGroup g) const { return (mask_ >> static_cast<int>(g)) & 1u; }
  constexpr bool empty() const { return mask_ == 0; }

  std::vector<FeatureGroup> groups() const {
    std::vector<FeatureGroup> out;
    for (auto g : kCanonicalGroups) {
      if (contains(g)) out.push_back(g);
    }
    return out;
  }

  std::size_t width() const {
    std::size_t w = 0;
    for (auto g : groups()) w += group_length(g);
    return w;
  }

  // Canonical comma list ("none" when empty).
  std::string to_string() const {
    if (empty()) return "none";
    std::string out;
    for (auto g : groups()) {
      if (!out.empty()) out += ',';
      out += group_key(g);
    }
    return out;
  }

  friend constexpr bool operator==(FeatureSelection, FeatureSelection) = default;

 private:
  std::uint32_t mask_ = 0;
};

struct FeatureSegment {
  FeatureGroup group{};
  std::vector<double> values;

  friend bool operator==(const FeatureSegment&, const FeatureSegment&) = default;
};

struct FeatureVector {
  std::vector<FeatureSegment> segments;  // canonical group order

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& s : segments) out.insert(out.end(), s.values.begin(), s.values.end());
    return out;
  }

  const FeatureSegment* find(FeatureGroup g) const {
    for (const auto& s : segments) {
      if (s.group == g) return &s;
    }
    return nullptr;
  }

  FeatureSelection selection() const {
    FeatureSelection sel;
    for (const auto& s : segments) sel.insert(s.group);
    return sel;
  }

  // The segments named by `sel`; every selected group must be present.
  FeatureVector subset(FeatureSelection sel) const {
    FeatureVector out;
    for (auto g : sel.groups()) {
      const auto* s = find(g);
      require(s != nullptr, ErrorKind::Join,
              "feature vector lacks group " + std::string(group_key(g)));
      out.segments.push_back(*s);
    }
    return out;
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// ---------------------------------------------------------------------------
// Sample mean

inline FeatureSegment mean_features(const ImageRGB& img) {
  std::array<std::uint64_t, 3> sums{};
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) sums[c] += img.data[3 * i + c];
  }
  const double denom = 255.0 * static_cast<double>(img.pixels());
  return {FeatureGroup::Mean,
          {static_cast<double>(sums[0]) / denom, static_cast<double>(sums[1]) / denom,
           static_cast<double>(sums[2]) / denom}};
}

// ---------------------------------------------------------------------------
// Gray level co-occurrence

struct GlcmOffset {
  int dy = 0;
  int dx = 1;
};

struct GLCM {
  int levels = 0;
  std::vector<double> matrix;  // row-major levels x levels

  double operator()(int i, int j) const {
    return matrix[static_cast<std::size_t>(i) * levels + j];
  }
};

inline constexpr int kGlcmLevels = 64;

inline GLCM glcm_matrix(const ImageGray& img, int levels = kGlcmLevels, GlcmOffset offset = {}) {
  require(levels >= 2 && levels <= 256, ErrorKind::Contract, "glcm: levels must lie in [2, 256]");
  const int ady = std::abs(offset.dy);
  const int adx = std::abs(offset.dx);
  require(ady < img.height && adx < img.width, ErrorKind::Extraction,
          "glcm: offset does not fit inside a " + std::to_string(img.width) + "x" +
              std::to_string(img.height) + " image");

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(levels) * levels, 0);
  const auto quantize = [levels](std::uint8_t v) { return (static_cast<int>(v) * levels) / 256; };
  const int y0 = std::max(0, -offset.dy);
  const int y1 = std::min(img.height, img.height - offset.dy);
  const int x0 = std::max(0, -offset.dx);
  const int x1 = std::min(img.width, img.width - offset.dx);
  std::uint64_t total = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const int a = quantize(img(x, y));
      const int b = quantize(img(x + offset.dx, y + offset.dy));
      ++counts[static_cast<std::size_t>(a) * levels + b];
      ++counts[static_cast<std::size_t>(b) * levels + a];
      total += 2;
    }
  }

  GLCM glcm{levels, std::vector<double>(counts.size())};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    glcm.matrix[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return glcm;
}

// Order: contrast, correlation, homogeneity, energy, ASM.
inline FeatureSegment haralick_features(const GLCM& glcm) {
  const int n = glcm.levels;
  require(n >= 2 && glcm.matrix.size() == static_cast<std::size_t>(n) * n, ErrorKind::Contract,
          "haralick: matrix shape does not match levels");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double p = glcm(i, j);
      require(std::isfinite(p) && p >= 0.0, ErrorKind::Contract,
              "haralick: GLCM entries must be finite and non-negative");
      require(std::abs(p - glcm(j, i)) <= 1e-12, ErrorKind::Contract,
              "haralick: GLCM must be symmetric");
      sum += p;
    }
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::Contract, "haralick: GLCM must sum to 1");

  // Marginals coincide for a symmetric matrix.
  double mu = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) mu += i * glcm(i, j);
  }
  double var = 0.0;
  double contrast = 0.0;
  double covariance = 0.0;
  double homogeneity = 0.0;
  double asm_ = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double p = glcm(i, j);
      if (p == 0.0) continue;
      const double d = i - j;
      var += p * (i - mu) * (i - mu);
      contrast += p * d * d;
      covariance += p * (i - mu) * (j - mu);
      homogeneity += p / (1.0 + d * d);
      asm_ += p * p;
    }
  }
  const double correlation = var > 0.0 ? covariance / var : 1.0;
  return {FeatureGroup::GLCM, {contrast, correlation, homogeneity, std::sqrt(asm_), asm_}};
}

// ---------------------------------------------------------------------------
// Hu moments

inline double signed_log10(double h) {
  if (h == 0.0) return 0.0;
  return -std::copysign(1.0, h) * std::log10(std::abs(h));
}

inline std::array<double, 7> hu_invariants(const ImageGray& img) {
  // Raw and central moments are carried as exact integers, so rotations and
  // reflections permute them exactly.
  using i128 = __int128;
  i128 m00 = 0, m10 = 0, m01 = 0, m20 = 0, m11 = 0, m02 = 0;
  i128 m30 = 0, m21 = 0, m12 = 0, m03 = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const i128 v = img(x, y);
      if (v == 0) continue;
      const i128 X = x;
      const i128 Y = y;
      m00 += v;
      m10 += X * v;
      m01 += Y * v;
      m20 += X * X * v;
      m11 += X * Y * v;
      m02 += Y * Y * v;
      m30 += X * X * X * v;
      m21 += X * X * Y * v;
      m12 += X * Y * Y * v;
      m03 += Y * Y * Y * v;
    }
  }
  if (m00 == 0) return {};
  const i128 S = m00;

  // S * mu_pq for order 2, S^2 * mu_pq for order 3.
  const i128 a20 = S * m20 - m10 * m10;
  const i128 a02 = S * m02 - m01 * m01;
  const i128 a11 = S * m11 - m10 * m01;
  const i128 a30 = S * S * m30 - 3 * S * m10 * m20 + 2 * m10 * m10 * m10;
  const i128 a03 = S * S * m03 - 3 * S * m01 * m02 + 2 * m01 * m01 * m01;
  const i128 a21 = S * S * m21 - S * m01 * m20 - 2 * S * m10 * m11 + 2 * m10 * m10 * m01;
  const i128 a12 = S * S * m12 - S * m10 * m02 - 2 * S * m01 * m11 + 2 * m01 * m01 * m10;

  // eta_pq = mu_pq / mu00^(1 + (p+q)/2)
  const double s = static_cast<double>(S);
  const double norm2 = s * s * s;
  const double norm3 = s * s * s * s * std::sqrt(s);
  const double n20 = static_cast<double>(a20) / norm2;
  const double n02 = static_cast<double>(a02) / norm2;
  const double n11 = static_cast<double>(a11) / norm2;
  const double n30 = static_cast<double>(a30) / norm3;
  const double n03 = static_cast<double>(a03) / norm3;
  const double n21 = static_cast<double>(a21) / norm3;
  const double n12 = static_cast<double>(a12) / norm3;

  const double t0 = n30 + n12;
  const double t1 = n21 + n03;
  const double q0 = n30 - 3 * n12;
  const double q1 = 3 * n21 - n03;
  std::array<double, 7> h{};
  h[0] = n20 + n02;
  h[1] = (n20 - n02) * (n20 - n02) + 4 * n11 * n11;
  h[2] = q0 * q0 + q1 * q1;
  h[3] = t0 * t0 + t1 * t1;
  h[4] = q0 * t0 * (t0 * t0 - 3 * t1 * t1) + q1 * t1 * (3 * t0 * t0 - t1 * t1);
  h[5] = (n20 - n02) * (t0 * t0 - t1 * t1) + 4 * n11 * t0 * t1;
  h[6] = q1 * t0 * (t0 * t0 - 3 * t1 * t1) - q0 * t1 * (3 * t0 * t0 - t1 * t1);
  return h;
}

inline constexpr int kHuMaxSide = 1024;

inline FeatureSegment hu_moments(const ImageGray& img) {
  require(img.width <= kHuMaxSide && img.height <= kHuMaxSide, ErrorKind::Extraction,
          "hu: images larger than 1024x1024 overflow exact moment accumulation");
  const auto h = hu_invariants(img);
  FeatureSegment seg{FeatureGroup::Hu, std::vector<double>(7)};
  for (int k = 0; k < 7; ++k) seg.values[k] = signed_log10(h[k]);
  return seg;
}

// ---------------------------------------------------------------------------
// Local binary patterns

inline void require_neighborhood(const ImageGray& img, std::string_view who) {
  require(img.width >= 3 && img.height >= 3, ErrorKind::Extraction,
          std::string(who) + ": image must be at least 3x3, got " + std::to_string(img.width) +
              "x" + std::to_string(img.height));
}

// Neighbor k (clockwise from top-left) sets bit k when neighbor >= center.
inline std::uint8_t lbp_code(const ImageGray& img, int x, int y) {
  static constexpr int kDx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  static constexpr int kDy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  const auto center = img(x, y);
  unsigned code = 0;
  for (int k = 0; k < 8; ++k) {
    if (img(x + kDx[k], y + kDy[k]) >= center) code |= 1u << k;
  }
  return static_cast<std::uint8_t>(code);
}

inline FeatureSegment lbp_features(const ImageGray& img) {
  require_neighborhood(img, "lbp");
  std::array<std::uint64_t, 64> bins{};
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) ++bins[lbp_code(img, x, y) >> 2];
  }
  const double total = static_cast<double>(img.width - 2) * (img.height - 2);
  FeatureSegment seg{FeatureGroup::LBP, std::vector<double>(64)};
  for (int k = 0; k < 64; ++k) seg.values[k] = static_cast<double>(bins[k]) / total;
  return seg;
}

// ---------------------------------------------------------------------------
// Histogram of oriented gradients

// 64-bin index of theta = atan2(gy, gx) on [-pi, pi). The vector is first
// turned by an exact multiple of 90 degrees into the first quadrant, so the
// bin of a quarter-turned gradient is always shifted by exactly 16 and
// boundary angles land in the upper bin.
inline int orientation_bin(int gx, int gy) {
  if (gx == 0 && gy == 0) return 32;
  int quadrant = 0;
  int a = gx;
  int b = gy;
  if (gx > 0 && gy >= 0) {
    quadrant = 0;
  } else if (gx <= 0 && gy > 0) {
    quadrant = 1;
    a = gy;
    b = -gx;
  } else if (gx < 0 && gy <= 0) {
    quadrant = 2;
    a = -gx;
    b = -gy;
  } else {
    quadrant = 3;
    a = -gy;
    b = gx;
  }
  const double phi = std::atan2(static_cast<double>(b), static_cast<double>(a));
  const int sub = std::min(15, static_cast<int>(std::floor(phi * 32.0 / std::numbers::pi)));
  return (32 + 16 * quadrant + sub) % 64;
}

inline FeatureSegment hog_features(const ImageGray& img) {
  require_neighborhood(img, "hog");
  std::array<double, 64> bins{};
  double total = 0.0;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      const int gx = static_cast<int>(img(x + 1, y)) - img(x - 1, y);
      const int gy = static_cast<int>(img(x, y + 1)) - img(x, y - 1);
      if (gx == 0 && gy == 0) continue;
      const double magnitude = std::sqrt(static_cast<double>(gx * gx + gy * gy));
      bins[orientation_bin(gx, gy)] += magnitude;
      total += magnitude;
    }
  }
  FeatureSegment seg{FeatureGroup::HOG, std::vector<double>(64, 0.0)};
  if (total == 0.0) return seg;
  for (int k = 0; k < 64; ++k) seg.values[k] = bins[k] / total;
  return seg;
}

// ---------------------------------------------------------------------------
// Gaussian color model invariant

// Gaussian color model components in hundredths, so they are exact integers:
// E = .06R + .63G + .27B, El = .30R + .04G - .35B, Ell = .34R - .60G + .17B.
struct GaussianColor {
  int e;
  int e_l;
  int e_ll;
};

inline constexpr GaussianColor gaussian_color(int r, int g, int b) {
  return {6 * r + 63 * g + 27 * b, 30 * r + 4 * g - 35 * b, 34 * r - 60 * g + 17 * b};
}

// Bin of the invariant angle atan2(El, Ell); atan2(0, 0) is taken as 0.
inline int color_invariant_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto c = gaussian_color(r, g, b);
  return orientation_bin(c.e_ll, c.e_l);
}

inline FeatureSegment color_invariant_features(const ImageRGB& img) {
  std::array<std::uint64_t, 64> bins{};
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const auto* p = &img.data[3 * i];
    ++bins[color_invariant_bin(p[0], p[1], p[2])];
  }
  const double total = static_cast<double>(img.pixels());
  FeatureSegment seg{FeatureGroup::ColorInv, std::vector<double>(64)};
  for (int k = 0; k < 64; ++k) seg.values[k] = static_cast<double>(bins[k]) / total;
  return seg;
}

// ---------------------------------------------------------------------------

inline FeatureVector extract_all(const ImageRGB& img, FeatureSelection sel) {
  FeatureVector fv;
  std::optional<ImageGray> gray;
  const auto luma_view = [&]() -> const ImageGray& {
    if (!gray) gray = to_gray(img);
    return *gray;
  };
  for (auto g : sel.groups()) {
    try {
      switch (g) {
        case FeatureGroup::Mean: fv.segments.push_back(mean_features(img)); break;
        case FeatureGroup::GLCM: fv.segments.push_back(haralick_features(glcm_matrix(luma_view()))); break;
        case FeatureGroup::Hu: fv.segments.push_back(hu_moments(luma_view())); break;
        case FeatureGroup::LBP: fv.segments.push_back(lbp_features(luma_view())); break;
        case FeatureGroup::HOG: fv.segments.push_back(hog_features(luma_view())); break;
        case FeatureGroup::ColorInv: fv.segments.push_back(color_invariant_features(img)); break;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "[" + std::string(group_key(g)) + "] " + e.what());
    }
  }
  return fv;
}

}  // namespace finj
