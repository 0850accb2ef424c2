#include "cs4l/pretext.hpp"

#include <torch/torch.h>

#include "cs4l/colorizer.hpp"

namespace cs4l {

std::string_view to_string(ProxyClass cls) {
  switch (cls) {
    case ProxyClass::Rot0: return "rot0";
    case ProxyClass::Rot90: return "rot90";
    case ProxyClass::Rot180: return "rot180";
    case ProxyClass::Rot270: return "rot270";
    case ProxyClass::HFlip: return "hflip";
    case ProxyClass::VFlip: return "vflip";
    case ProxyClass::Colorized: return "colorized";
  }
  return "?";
}

Image grayscale(const Image& image) {
  if (image.channels() != 3)
    throw ContractError("grayscale expects 3 channels, got " + std::to_string(image.channels()));
  Image out(image.height(), image.width(), 1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      float v = kLumaWeights[0] * image.at(y, x, 0) + kLumaWeights[1] * image.at(y, x, 1) +
                kLumaWeights[2] * image.at(y, x, 2);
      out.at(y, x, 0) = std::min(v, 1.0f);
    }
  return out;
}

namespace {

Image apply_geometric(const Image& image, ProxyClass cls) {
  switch (cls) {
    case ProxyClass::Rot0: return image;
    case ProxyClass::Rot90: return rotate90(image, 1);
    case ProxyClass::Rot180: return rotate90(image, 2);
    case ProxyClass::Rot270: return rotate90(image, 3);
    case ProxyClass::HFlip: return hflip(image);
    case ProxyClass::VFlip: return vflip(image);
    case ProxyClass::Colorized: break;
  }
  throw ContractError("not a geometric proxy class");
}

}  // namespace

Image apply_proxy(const Image& image, ProxyClass cls, const ColorizerParams* colorizer) {
  if (image.channels() != 3) throw ContractError("proxy transforms expect 3-channel images");
  if (cls != ProxyClass::Colorized) return apply_geometric(image, cls);
  if (colorizer == nullptr) throw ConfigError("colorized proxy class requested but no colorizer is loaded");
  return colorize(*colorizer, grayscale(image));
}

ProxyBatch sample_proxy_batch(std::span<const Image> images, Rng& rng, const ColorizerParams* colorizer,
                              int num_classes) {
  if (num_classes != kNumProxyClasses && num_classes != kNumGeometricClasses)
    throw ConfigError("proxy class count must be 6 or 7");
  ProxyBatch batch;
  batch.images.reserve(images.size());
  batch.labels.reserve(images.size());
  std::uniform_int_distribution<int> pick(0, num_classes - 1);
  std::vector<std::size_t> to_color;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto cls = static_cast<ProxyClass>(pick(rng));
    batch.labels.push_back(cls);
    if (cls == ProxyClass::Colorized) {
      to_color.push_back(i);
      batch.images.push_back(images[i]);
    } else {
      batch.images.push_back(apply_proxy(images[i], cls, colorizer));
    }
  }
  if (!to_color.empty()) {
    if (colorizer == nullptr) throw ConfigError("colorized proxy class requested but no colorizer is loaded");
    std::vector<Image> gray;
    gray.reserve(to_color.size());
    for (auto i : to_color) gray.push_back(grayscale(images[i]));
    auto colored = tensor_to_images(colorizer_forward(*colorizer, images_to_tensor(gray)));
    for (std::size_t j = 0; j < to_color.size(); ++j) batch.images[to_color[j]] = std::move(colored[j]);
  }
  return batch;
}

}  // namespace cs4l
