#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "cs4l/colorizer.hpp"
#include "cs4l/data.hpp"
#include "cs4l/model.hpp"
#include "cs4l/optim.hpp"
#include "cs4l/pretext.hpp"
#include "cs4l/tensor_io.hpp"

namespace cs4l {

struct TrainConfig {
  double omega = 1.0;
  int batch = 128;
  int epochs = 30;  // passes over D_U
  Arch arch = Arch::ConvNet13;
  DatasetKind dataset = DatasetKind::Cifar10;
  std::size_t budget = 1000;
  std::string colorizer_path;
  std::uint64_t seed = 0;

  double lr0 = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double width_scale = 1.0;

  bool augment = true;
  // false trains the supervised branch alone (no proxy batches at all).
  bool self_supervised = true;
  // 7 = rotations, flips and colorization; 6 = geometric classes only.
  int proxy_classes = kNumProxyClasses;
  // Caps the run below epochs * ceil(|D_U| / batch) when positive.
  std::int64_t max_steps = 0;
  std::string checkpoint_dir;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossReport {
  double l_super = 0.0;
  double l_self = 0.0;
  double total = 0.0;
  std::int64_t step = 0;
};

// Paired mini-batches of one step; both halves hold exactly B images.
struct BatchPair {
  std::vector<Image> labeled_images;
  std::vector<int> labels;
  std::vector<Image> unlabeled_images;

  std::size_t batch() const { return labeled_images.size(); }
  void validate() const;
};

struct LossTerms {
  torch::Tensor l_super;
  torch::Tensor l_self;
  torch::Tensor total;
};

// total = l_super + omega * l_self. With omega == 0 the self-supervised
// branch is evaluated without a graph, so head_self receives no gradient.
LossTerms composite_loss(DualHeadModel& model, const torch::Tensor& labeled, const torch::Tensor& labels,
                         const torch::Tensor& proxy, const torch::Tensor& proxy_labels, double omega);

// One optimizer update on the composite loss. Labeled and proxy batches must
// have equal size.
LossReport train_step(DualHeadModel& model, const torch::Tensor& labeled, const torch::Tensor& labels,
                      const torch::Tensor& proxy, const torch::Tensor& proxy_labels, double omega,
                      OptimState& optim);

// Supervised branch only; used for the plain-supervised reference run.
LossReport supervised_step(DualHeadModel& model, const torch::Tensor& labeled, const torch::Tensor& labels,
                           OptimState& optim);

struct Checkpoint {
  TrainConfig config;
  std::int64_t step = 0;  // next step to run
  ChannelStats stats;
  std::vector<NamedTensor> model_state;  // parameters and buffers
  std::map<std::string, torch::Tensor> momentum;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);
// Copies parameters and buffers; throws ConfigError when the checkpoint was
// taken from a different architecture or class count.
void restore_model(DualHeadModel& model, const Checkpoint& checkpoint);

// Tensors fed to one training step.
struct StepBatch {
  torch::Tensor labeled;
  torch::Tensor labels;
  torch::Tensor proxy;
  torch::Tensor proxy_labels;
};

// Owns the model and optimizer of one run. Every random draw of step s is a
// function of (seed, s), so a run resumed from a checkpoint replays exactly.
class Trainer {
 public:
  Trainer(const DatasetSplit& split, TrainConfig config, const ColorizerParams* colorizer);
  Trainer(const DatasetSplit& split, const Checkpoint& checkpoint, const ColorizerParams* colorizer);

  StepBatch prepare(std::int64_t step) const;
  BatchPair batch_pair(std::int64_t step) const;
  LossReport step();
  bool finished() const { return optim_.step >= total_steps_; }

  std::int64_t total_steps() const { return total_steps_; }
  std::int64_t steps_per_epoch() const { return static_cast<std::int64_t>(unlabeled_.steps_per_epoch()); }
  std::int64_t steps_done() const { return optim_.step; }

  Checkpoint checkpoint() const;
  DualHeadModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  const ChannelStats& stats() const { return stats_; }

 private:
  void init_common();

  const DatasetSplit& split_;
  TrainConfig config_;
  const ColorizerParams* colorizer_;
  ChannelStats stats_;
  DualHeadModel model_{nullptr};
  OptimState optim_;
  LabeledCycler cycler_;
  UnlabeledSampler unlabeled_;
  std::int64_t total_steps_ = 0;
};

std::int64_t planned_steps(const TrainConfig& config, std::size_t unlabeled_count);

struct TrainObserver {
  std::function<void(const LossReport&)> on_step;
  std::function<void(int epoch, Trainer&)> on_epoch;
};

struct TrainResult {
  DualHeadModel model{nullptr};
  ChannelStats stats;
  std::vector<LossReport> trace;
};

// Runs every remaining step; writes epoch-<n>.ckpt into config.checkpoint_dir
// when it is set.
TrainResult train_loop(const DatasetSplit& split, const TrainConfig& config, const ColorizerParams* colorizer,
                       const TrainObserver& observer = {});
TrainResult continue_training(Trainer& trainer, const TrainObserver& observer = {});

// Fraction of rows whose argmax (lowest index on ties) differs from the label.
double error_rate(const torch::Tensor& logits, std::span<const int> labels);
// Evaluation mode (dropout off, BN running statistics).
double evaluate(DualHeadModel& model, std::span<const LabeledExample> test, const ChannelStats& stats,
                int batch = 500);

torch::Tensor normalized_tensor(std::span<const Image> images, const ChannelStats& stats);

struct EvalReport {
  std::vector<double> errors;  // per seed, fraction in [0,1]
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  nlohmann::json config;
};

EvalReport aggregate_runs(std::span<const double> errors);
// "MM.DD±SS.DD" in percent.
std::string format_cell(const EvalReport& report);

}  // namespace cs4l
