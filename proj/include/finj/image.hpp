#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "finj/error.hpp"

namespace finj {

// Row-major interleaved 8-bit RGB raster.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageRGB() = default;
  ImageRGB(int w, int h) : width(w), height(h), data(pixel_count(w, h) * 3, 0) {}
  ImageRGB(int w, int h, std::vector<std::uint8_t> samples)
      : width(w), height(h), data(std::move(samples)) {
    require(data.size() == pixel_count(w, h) * 3, ErrorKind::Contract,
            "ImageRGB: sample count does not match " + std::to_string(w) + "x" +
                std::to_string(h) + "x3");
  }

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }

  std::uint8_t* at(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  static std::size_t pixel_count(int w, int h) {
    require(w > 0 && h > 0, ErrorKind::Contract, "image dimensions must be positive");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
};

// Row-major 8-bit luma raster.
struct ImageGray {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageGray() = default;
  ImageGray(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {
    require(w > 0 && h > 0, ErrorKind::Contract, "image dimensions must be positive");
  }
  ImageGray(int w, int h, std::vector<std::uint8_t> samples)
      : width(w), height(h), data(std::move(samples)) {
    require(w > 0 && h > 0 && data.size() == static_cast<std::size_t>(w) * h,
            ErrorKind::Contract, "ImageGray: sample count does not match dimensions");
  }

  std::uint8_t operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const ImageGray&, const ImageGray&) = default;
};

// BT.601 luma, round half away from zero. Integer arithmetic keeps the
// result bit-exact: Y = (299 R + 587 G + 114 B + 500) / 1000.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const unsigned weighted = 299u * r + 587u * g + 114u * b;
  return static_cast<std::uint8_t>((weighted + 500u) / 1000u);
}

inline ImageGray to_gray(const ImageRGB& img) {
  ImageGray gray(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    gray.data[i] = luma(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
  }
  return gray;
}

inline ImageRGB expand_gray(const ImageGray& gray) {
  ImageRGB rgb(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.data.size(); ++i) {
    rgb.data[3 * i] = rgb.data[3 * i + 1] = rgb.data[3 * i + 2] = gray.data[i];
  }
  return rgb;
}

// Geometric helpers. rotate90 turns the image a quarter turn clockwise as
// displayed (x right, y down): out(x', y') = in(y', H - 1 - x').
template <typename Image>
Image rotate90(const Image& in) {
  constexpr int channels = std::is_same_v<Image, ImageRGB> ? 3 : 1;
  Image out(in.height, in.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int sx = y;
      const int sy = in.height - 1 - x;
      for (int c = 0; c < channels; ++c) {
        out.data[(static_cast<std::size_t>(y) * out.width + x) * channels + c] =
            in.data[(static_cast<std::size_t>(sy) * in.width + sx) * channels + c];
      }
    }
  }
  return out;
}

template <typename Image>
Image flip_horizontal(const Image& in) {
  constexpr int channels = std::is_same_v<Image, ImageRGB> ? 3 : 1;
  Image out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int c = 0; c < channels; ++c) {
        out.data[(static_cast<std::size_t>(y) * in.width + x) * channels + c] =
            in.data[(static_cast<std::size_t>(y) * in.width + (in.width - 1 - x)) * channels + c];
      }
    }
  }
  return out;
}

}  // namespace finj
