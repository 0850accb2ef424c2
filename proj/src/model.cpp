#include "cs4l/model.hpp"

#include <cmath>

#include "cs4l/errors.hpp"
#include "cs4l/pretext.hpp"
#include "cs4l/rng.hpp"

namespace cs4l {

namespace nn = torch::nn;

Arch parse_arch(std::string_view tag) {
  if (tag == "convnet13") return Arch::ConvNet13;
  if (tag == "wrn_28_4") return Arch::Wrn28_4;
  throw ConfigError("unknown architecture '" + std::string(tag) + "' (expected convnet13 or wrn_28_4)");
}

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::ConvNet13: return "convnet13";
    case Arch::Wrn28_4: return "wrn_28_4";
  }
  return "?";
}

void check_finite(const torch::Tensor& t, const std::string& what) {
  if (!torch::isfinite(t).all().item<bool>()) throw NumericError("non-finite values in " + what);
}

ConvNet13Impl::ConvNet13Impl(int in_channels, int base) : base_(base) {
  const int widths[3] = {base, 2 * base, 4 * base};
  int c_in = in_channels;
  for (int block = 0; block < 3; ++block)
    for (int j = 0; j < 3; ++j) {
      int idx = block * 3 + j;
      convs_.push_back(register_module("conv" + std::to_string(idx),
                                       nn::Conv2d(nn::Conv2dOptions(c_in, widths[block], 3).padding(1))));
      norms_.push_back(register_module("bn" + std::to_string(idx), nn::BatchNorm2d(widths[block])));
      c_in = widths[block];
    }
}

torch::Tensor ConvNet13Impl::forward(torch::Tensor x) {
  for (int block = 0; block < 3; ++block) {
    for (int j = 0; j < 3; ++j) {
      auto idx = static_cast<std::size_t>(block * 3 + j);
      x = torch::leaky_relu(norms_[idx]->forward(convs_[idx]->forward(x)), 0.1);
      if (!torch::isfinite(x).all().item<bool>())
        throw NumericError("non-finite activation at layer " + std::to_string(idx) + " (conv" +
                           std::to_string(idx) + ")");
    }
    x = torch::max_pool2d(x, 2);
    if (block < 2) x = torch::dropout(x, 0.5, is_training());
  }
  return x.mean({2, 3});
}

WideResNetImpl::WideResNetImpl(int depth, int widen, int in_channels, double width_scale) {
  if ((depth - 4) % 6 != 0) throw ConfigError("wide resnet depth must be 6n+4");
  const int n = (depth - 4) / 6;
  auto scaled = [&](int c) { return std::max(1, static_cast<int>(std::lround(c * width_scale))); };
  const int stem = scaled(16);
  const int widths[3] = {scaled(16 * widen), scaled(32 * widen), scaled(64 * widen)};
  stem_ = register_module("stem", nn::Conv2d(nn::Conv2dOptions(in_channels, stem, 3).padding(1).bias(false)));
  int c_in = stem;
  for (int g = 0; g < 3; ++g)
    for (int i = 0; i < n; ++i) {
      int stride = (g > 0 && i == 0) ? 2 : 1;
      int c_out = widths[g];
      std::string p = "g" + std::to_string(g) + "b" + std::to_string(i) + "_";
      Block b;
      b.bn1 = register_module(p + "bn1", nn::BatchNorm2d(c_in));
      b.conv1 = register_module(p + "conv1",
                                nn::Conv2d(nn::Conv2dOptions(c_in, c_out, 3).stride(stride).padding(1).bias(false)));
      b.bn2 = register_module(p + "bn2", nn::BatchNorm2d(c_out));
      b.conv2 = register_module(p + "conv2", nn::Conv2d(nn::Conv2dOptions(c_out, c_out, 3).padding(1).bias(false)));
      if (c_in != c_out || stride != 1)
        b.shortcut = register_module(p + "shortcut",
                                     nn::Conv2d(nn::Conv2dOptions(c_in, c_out, 1).stride(stride).bias(false)));
      blocks_.push_back(b);
      c_in = c_out;
    }
  final_bn_ = register_module("final_bn", nn::BatchNorm2d(c_in));
  out_channels_ = c_in;
}

torch::Tensor WideResNetImpl::forward(torch::Tensor x) {
  x = stem_->forward(x);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& b = blocks_[i];
    auto pre = torch::relu(b.bn1->forward(x));
    auto y = b.conv1->forward(pre);
    y = b.conv2->forward(torch::relu(b.bn2->forward(y)));
    x = (b.shortcut ? b.shortcut->forward(pre) : x) + y;
    if (!torch::isfinite(x).all().item<bool>())
      throw NumericError("non-finite activation at layer " + std::to_string(i) + " (residual block)");
  }
  x = torch::relu(final_bn_->forward(x));
  return x.mean({2, 3});
}

DualHeadModelImpl::DualHeadModelImpl(std::shared_ptr<BackboneImpl> bb, int num_classes, std::string arch_tag)
    : backbone(std::move(bb)), num_classes_(num_classes), arch_tag_(std::move(arch_tag)) {
  if (num_classes < 1) throw ConfigError("class count must be positive");
  register_module("backbone", backbone);
  const auto f = backbone->feature_dim();
  head_super = register_module("head_super", nn::Linear(f, num_classes));
  head_self = register_module("head_self", nn::Linear(f, kNumProxyClasses));
}

torch::Tensor DualHeadModelImpl::features(const torch::Tensor& x) { return backbone->forward(x); }

torch::Tensor DualHeadModelImpl::head_logits(const torch::Tensor& feats, Head head) {
  return head == Head::Supervised ? head_super->forward(feats) : head_self->forward(feats);
}

torch::Tensor DualHeadModelImpl::forward(const torch::Tensor& x, Head head) {
  auto logits = head_logits(features(x), head);
  check_finite(logits, head == Head::Supervised ? "supervised logits" : "self-supervised logits");
  return logits;
}

void init_weights(nn::Module& module, std::uint64_t seed) {
  torch::manual_seed(derive_seed(seed, Stream::Init));
  torch::NoGradGuard no_grad;
  for (auto& m : module.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<nn::Conv2d>()) {
      nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* lin = m->as<nn::Linear>()) {
      nn::init::normal_(lin->weight, 0.0, 1.0 / std::sqrt(static_cast<double>(lin->weight.size(1))));
      lin->bias.zero_();
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
    }
  }
}

DualHeadModel build_model(const ModelOptions& options) {
  std::shared_ptr<BackboneImpl> backbone;
  switch (options.arch) {
    case Arch::ConvNet13: {
      int base = std::max(1, static_cast<int>(std::lround(128 * options.width_scale)));
      backbone = std::make_shared<ConvNet13Impl>(3, base);
      break;
    }
    case Arch::Wrn28_4:
      backbone = std::make_shared<WideResNetImpl>(28, 4, 3, options.width_scale);
      break;
  }
  DualHeadModel model(backbone, options.num_classes, std::string(to_string(options.arch)));
  init_weights(*model, options.seed);
  return model;
}

std::int64_t count_parameters(const nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

torch::Tensor softmax(const torch::Tensor& logits) {
  auto shifted = logits - std::get<0>(logits.max(-1, /*keepdim=*/true)).detach();
  auto e = shifted.exp();
  return e / e.sum(-1, /*keepdim=*/true);
}

torch::Tensor cross_entropy(const torch::Tensor& logits, const torch::Tensor& targets) {
  if (logits.dim() != 2) throw ContractError("cross_entropy expects B x C logits");
  if (targets.dim() != 1 || targets.size(0) != logits.size(0))
    throw ContractError("cross_entropy target count differs from batch size");
  if (targets.numel() == 0) throw ContractError("cross_entropy of an empty batch");
  auto t = targets.to(torch::kInt64);
  if ((t < 0).any().item<bool>() || (t >= logits.size(1)).any().item<bool>())
    throw ContractError("cross_entropy target out of range [0, " + std::to_string(logits.size(1)) + ")");
  auto m = std::get<0>(logits.max(1, /*keepdim=*/true)).detach();
  auto lse = (logits - m).exp().sum(1).log() + m.squeeze(1);
  auto picked = logits.gather(1, t.unsqueeze(1)).squeeze(1);
  return (lse - picked).mean();
}

torch::Tensor cross_entropy(const torch::Tensor& logits, const std::vector<int>& targets) {
  std::vector<std::int64_t> t(targets.begin(), targets.end());
  return cross_entropy(logits, torch::tensor(t, torch::kInt64));
}

std::vector<int> argmax_rows(const torch::Tensor& logits) {
  auto l = logits.detach().to(torch::kFloat64).contiguous();
  auto acc = l.accessor<double, 2>();
  std::vector<int> out(static_cast<std::size_t>(l.size(0)));
  for (std::int64_t i = 0; i < l.size(0); ++i) {
    int best = 0;
    for (std::int64_t j = 1; j < l.size(1); ++j)
      if (acc[i][j] > acc[i][best]) best = static_cast<int>(j);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

std::vector<torch::Tensor> gradients(nn::Module& module, const torch::Tensor& loss, bool retain_graph) {
  auto params = module.parameters();
  auto grads = torch::autograd::grad({loss}, params, {}, retain_graph, false, /*allow_unused=*/true);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].defined()) grads[i] = torch::zeros_like(params[i]);
    check_finite(grads[i], "gradient of parameter " + std::to_string(i));
  }
  return grads;
}

}  // namespace cs4l
