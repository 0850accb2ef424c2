#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace cs4l {

enum class Arch { ConvNet13, Wrn28_4 };

Arch parse_arch(std::string_view tag);
std::string_view to_string(Arch arch);

enum class Head { Supervised, Self };

// Shared feature extractor f_theta: N x C x H x W -> N x feature_dim.
struct BackboneImpl : torch::nn::Module {
  virtual torch::Tensor forward(torch::Tensor x) = 0;
  virtual std::int64_t feature_dim() const = 0;
};

// 13-layer max-pooling ConvNet: three blocks of three 3x3 conv + BN + LeakyReLU(0.1),
// each block closed by 2x2 max-pool; dropout(0.5) after the first two pools;
// global average pool. Channels are base, 2*base, 4*base (base = 128).
struct ConvNet13Impl : BackboneImpl {
  explicit ConvNet13Impl(int in_channels = 3, int base = 128);
  torch::Tensor forward(torch::Tensor x) override;
  std::int64_t feature_dim() const override { return 4 * base_; }

 private:
  int base_;
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<torch::nn::BatchNorm2d> norms_;
};

// Pre-activation wide residual network (depth 28 -> 4 blocks per group).
struct WideResNetImpl : BackboneImpl {
  WideResNetImpl(int depth = 28, int widen = 4, int in_channels = 3, double width_scale = 1.0);
  torch::Tensor forward(torch::Tensor x) override;
  std::int64_t feature_dim() const override { return out_channels_; }

 private:
  struct Block {
    torch::nn::BatchNorm2d bn1{nullptr};
    torch::nn::Conv2d conv1{nullptr};
    torch::nn::BatchNorm2d bn2{nullptr};
    torch::nn::Conv2d conv2{nullptr};
    torch::nn::Conv2d shortcut{nullptr};  // 1x1, only where the shape changes
  };
  torch::nn::Conv2d stem_{nullptr};
  std::vector<Block> blocks_;
  torch::nn::BatchNorm2d final_bn_{nullptr};
  std::int64_t out_channels_;
};

// Backbone plus a K-way supervised head and a 7-way self-supervised head,
// both reading the same feature vector.
struct DualHeadModelImpl : torch::nn::Module {
  DualHeadModelImpl(std::shared_ptr<BackboneImpl> backbone, int num_classes, std::string arch_tag);

  torch::Tensor features(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x, Head head);
  torch::Tensor head_logits(const torch::Tensor& features, Head head);

  int num_classes() const { return num_classes_; }
  const std::string& arch_tag() const { return arch_tag_; }

  std::shared_ptr<BackboneImpl> backbone;
  torch::nn::Linear head_super{nullptr};
  torch::nn::Linear head_self{nullptr};

 private:
  int num_classes_;
  std::string arch_tag_;
};
TORCH_MODULE(DualHeadModel);

struct ModelOptions {
  Arch arch = Arch::ConvNet13;
  int num_classes = 10;
  std::uint64_t seed = 0;
  // Multiplies every channel count; 1.0 is the published architecture.
  double width_scale = 1.0;
};

DualHeadModel build_model(const ModelOptions& options);
// Fan-in scaled normal weights, zero biases, unit BN scale. Seeded.
void init_weights(torch::nn::Module& module, std::uint64_t seed);

std::int64_t count_parameters(const torch::nn::Module& module);

// Max-shifted softmax over the last dimension.
torch::Tensor softmax(const torch::Tensor& logits);
// Mean over rows of -log softmax(logits)[target], via log-sum-exp.
torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& targets);
torch::Tensor cross_entropy(const torch::Tensor& logits, const std::vector<int>& targets);

// Row-wise argmax, ties broken toward the lowest index.
std::vector<int> argmax_rows(const torch::Tensor& logits);

// Throws NumericError naming `what` if any element is NaN or infinite.
void check_finite(const torch::Tensor& t, const std::string& what);

// d loss / d param for every parameter of `module`, zeros where unused.
std::vector<torch::Tensor> gradients(torch::nn::Module& module, const torch::Tensor& loss,
                                     bool retain_graph = false);

}  // namespace cs4l
