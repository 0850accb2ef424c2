#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "cs4l/errors.hpp"

namespace cs4l {

// H x W x C pixels stored row-major, channel-interleaved.
// Pixel type is std::uint8_t at rest ([0,255]) and float in the pipeline ([0,1]).
template <typename T>
class BasicImage {
 public:
  using value_type = T;

  BasicImage() = default;
  BasicImage(int height, int width, int channels)
      : height_(height), width_(width), channels_(channels),
        pixels_(static_cast<std::size_t>(checked_size(height, width, channels))) {}
  BasicImage(int height, int width, int channels, std::vector<T> pixels)
      : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
    if (pixels_.size() != static_cast<std::size_t>(checked_size(height, width, channels)))
      throw ContractError("image pixel buffer does not match H*W*C");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  T& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
  const T& at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  std::span<T> pixels() { return pixels_; }
  std::span<const T> pixels() const { return pixels_; }

  bool operator==(const BasicImage&) const = default;

 private:
  static long checked_size(int h, int w, int c) {
    if (h <= 0 || w <= 0 || c <= 0) throw ContractError("image dimensions must be positive");
    return static_cast<long>(h) * w * c;
  }
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> pixels_;
};

using ImageU8 = BasicImage<std::uint8_t>;
using Image = BasicImage<float>;

Image to_float(const ImageU8& image);
// Rounds to nearest and clamps to [0,255].
ImageU8 to_u8(const Image& image);

// Checks the storage-mode range: [0,1] for float images.
bool in_unit_range(const Image& image);

// Shape only; used in diagnostics.
template <typename T>
std::ostream& operator<<(std::ostream& os, const BasicImage<T>& image) {
  return os << "Image(" << image.height() << "x" << image.width() << "x" << image.channels() << ")";
}

}  // namespace cs4l
