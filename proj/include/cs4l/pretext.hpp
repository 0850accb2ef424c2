#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "cs4l/image.hpp"
#include "cs4l/rng.hpp"

namespace cs4l {

struct ColorizerParams;

// Self-supervised targets. The numeric codes are the training labels.
enum class ProxyClass : std::uint8_t {
  Rot0 = 0,
  Rot90 = 1,
  Rot180 = 2,
  Rot270 = 3,
  HFlip = 4,
  VFlip = 5,
  Colorized = 6,
};

inline constexpr int kNumProxyClasses = 7;
inline constexpr int kNumGeometricClasses = 6;

std::string_view to_string(ProxyClass cls);
inline std::ostream& operator<<(std::ostream& os, ProxyClass cls) { return os << to_string(cls); }

// Counterclockwise rotation by k * 90 degrees. Odd k swaps height and width.
template <typename T>
BasicImage<T> rotate90(const BasicImage<T>& image, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return image;
  const int h = image.height(), w = image.width(), c = image.channels();
  const bool swap = (k % 2) == 1;
  BasicImage<T> out(swap ? w : h, swap ? h : w, c);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      int sy = 0, sx = 0;
      switch (k) {
        case 1: sy = x; sx = w - 1 - y; break;
        case 2: sy = h - 1 - y; sx = w - 1 - x; break;
        case 3: sy = h - 1 - x; sx = y; break;
      }
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = image.at(sy, sx, ch);
    }
  return out;
}

// Left-right mirror: reverses column order.
template <typename T>
BasicImage<T> hflip(const BasicImage<T>& image) {
  BasicImage<T> out(image.height(), image.width(), image.channels());
  const int w = image.width();
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < image.channels(); ++ch) out.at(y, x, ch) = image.at(y, w - 1 - x, ch);
  return out;
}

// Up-down mirror: reverses row order.
template <typename T>
BasicImage<T> vflip(const BasicImage<T>& image) {
  BasicImage<T> out(image.height(), image.width(), image.channels());
  const int h = image.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int ch = 0; ch < image.channels(); ++ch) out.at(y, x, ch) = image.at(h - 1 - y, x, ch);
  return out;
}

inline constexpr std::array<float, 3> kLumaWeights{0.299f, 0.587f, 0.114f};

// H x W x 3 -> H x W x 1 luminance.
Image grayscale(const Image& image);

// Geometric classes apply the matching transform; Colorized replaces the image
// with colorizer(grayscale(image)). Throws ConfigError for Colorized without a colorizer.
Image apply_proxy(const Image& image, ProxyClass cls, const ColorizerParams* colorizer);

struct ProxyBatch {
  std::vector<Image> images;
  std::vector<ProxyClass> labels;
};

// Each image gets a class drawn uniformly from the first `num_classes` codes
// (7 = all, 6 = geometric only). Colorized images are recolored in one batched pass.
ProxyBatch sample_proxy_batch(std::span<const Image> images, Rng& rng, const ColorizerParams* colorizer,
                              int num_classes = kNumProxyClasses);

}  // namespace cs4l
