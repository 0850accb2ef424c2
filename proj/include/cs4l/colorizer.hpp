#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "cs4l/image.hpp"

namespace cs4l {

// Encoder: three stride-2 3x3 conv stages (1->32->64->128) with ReLU.
// Decoder: three nearest 2x upsample + 3x3 conv stages (128->64->32->32)
// with ReLU, then a 1x1 conv to RGB through a sigmoid.
struct ColorizerNetImpl : torch::nn::Module {
  ColorizerNetImpl();
  torch::Tensor forward(torch::Tensor gray);

  torch::nn::Conv2d enc1{nullptr}, enc2{nullptr}, enc3{nullptr};
  torch::nn::Conv2d dec1{nullptr}, dec2{nullptr}, dec3{nullptr};
  torch::nn::Conv2d to_rgb{nullptr};
};
TORCH_MODULE(ColorizerNet);

struct ColorizerConfig {
  int epochs = 100;
  int batch = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct ColorizerParams {
  ColorizerNet net;
  std::string dataset;
  int epochs = 0;
  std::vector<double> epoch_losses;

  // Fresh randomly initialized network, deterministic per seed.
  static ColorizerParams init(std::uint64_t seed);
};

// gray: B x 1 x H x W in [0,1]. Returns B x 3 x H x W strictly inside (0,1).
torch::Tensor colorizer_forward(const ColorizerParams& params, const torch::Tensor& gray);
// Single-image convenience over HWC images; input must have one channel.
Image colorize(const ColorizerParams& params, const Image& gray);

// Mean squared error over all elements.
torch::Tensor colorizer_loss(const torch::Tensor& pred, const torch::Tensor& target);

using ColorizerEpochObserver = std::function<void(int epoch, double mean_loss, const ColorizerParams&)>;

// Regress RGB from luminance with Adam. Records the mean training loss of
// every epoch in params.epoch_losses.
ColorizerParams train_colorizer(std::span<const Image> images, const ColorizerConfig& config,
                                const std::string& dataset_name,
                                const ColorizerEpochObserver& observer = {});
// Continues training an existing network.
void train_colorizer(ColorizerParams& params, std::span<const Image> images, const ColorizerConfig& config,
                     const ColorizerEpochObserver& observer = {});

// Reconstruction MSE of colorizer(grayscale(x)) against x, no gradient.
double colorizer_mse(const ColorizerParams& params, std::span<const Image> images, int batch = 256);

void save_colorizer(const ColorizerParams& params, const std::filesystem::path& file);
ColorizerParams load_colorizer(const std::filesystem::path& file);

// "<dataset>-<epochs>-color"
std::string colorizer_artifact_name(const std::string& dataset, int epochs);

// HWC images to an NCHW float tensor and back.
torch::Tensor images_to_tensor(std::span<const Image> images);
std::vector<Image> tensor_to_images(const torch::Tensor& nchw);

}  // namespace cs4l
