#include "cs4l/optim.hpp"

#include <cmath>
#include <numbers>

#include "cs4l/errors.hpp"

namespace cs4l {

double cosine_lr(const SgdOptions& options, std::int64_t step) {
  const double t = std::min<double>(static_cast<double>(step), static_cast<double>(options.total_steps));
  return options.lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(options.total_steps)));
}

void sgd_step(const std::vector<std::pair<std::string, torch::Tensor>>& params,
              const std::vector<torch::Tensor>& grads, OptimState& state) {
  if (params.size() != grads.size()) throw ContractError("gradient list not aligned with parameters");
  torch::NoGradGuard no_grad;
  const auto& o = state.options;
  const double lr = cosine_lr(o, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, w] = params[i];
    if (!grads[i].defined()) continue;
    auto g = grads[i];
    if (o.weight_decay != 0.0) g = g + o.weight_decay * w;
    if (o.momentum != 0.0) {
      auto it = state.momentum.find(name);
      if (it == state.momentum.end()) {
        it = state.momentum.emplace(name, g.clone()).first;
      } else {
        it->second.mul_(o.momentum).add_(g);
      }
      g = it->second;
    }
    w.sub_(lr * g);
  }
  ++state.step;
}

void sgd_step(torch::nn::Module& module, OptimState& state) {
  std::vector<std::pair<std::string, torch::Tensor>> params;
  std::vector<torch::Tensor> grads;
  for (const auto& p : module.named_parameters()) {
    params.emplace_back(p.key(), p.value());
    grads.push_back(p.value().grad());
  }
  sgd_step(params, grads, state);
}

}  // namespace cs4l
