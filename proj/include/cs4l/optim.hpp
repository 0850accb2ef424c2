#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace cs4l {

struct SgdOptions {
  double lr0 = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::int64_t total_steps = 1;  // cosine schedule length
};

struct OptimState {
  SgdOptions options;
  std::int64_t step = 0;
  std::map<std::string, torch::Tensor> momentum;
};

// lr0 * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(const SgdOptions& options, std::int64_t step);

// One momentum-SGD update with L2 weight decay folded into the gradient:
//   g = grad + wd * w;  buf = momentum * buf + g (buf = g first time);  w -= lr * buf.
// Parameters whose gradient is undefined are skipped entirely.
void sgd_step(const std::vector<std::pair<std::string, torch::Tensor>>& params,
              const std::vector<torch::Tensor>& grads, OptimState& state);

// Same update reading each parameter's .grad().
void sgd_step(torch::nn::Module& module, OptimState& state);

}  // namespace cs4l
