#include "cs4l/image.hpp"

#include <algorithm>
#include <cmath>

namespace cs4l {

Image to_float(const ImageU8& image) {
  Image out(image.height(), image.width(), image.channels());
  auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  return out;
}

ImageU8 to_u8(const Image& image) {
  ImageU8 out(image.height(), image.width(), image.channels());
  auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    float v = std::round(std::clamp(src[i], 0.0f, 1.0f) * 255.0f);
    dst[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

bool in_unit_range(const Image& image) {
  return std::ranges::all_of(image.pixels(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

}  // namespace cs4l
