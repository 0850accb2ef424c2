#include "cs4l/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "cs4l/errors.hpp"
#include "cs4l/rng.hpp"

namespace cs4l {

void TrainConfig::validate() const {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be a finite value >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (proxy_classes != kNumProxyClasses && proxy_classes != kNumGeometricClasses)
    throw ConfigError("proxy_classes must be 6 or 7");
  if (width_scale <= 0.0) throw ConfigError("width_scale must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"omega", c.omega},
       {"batch", c.batch},
       {"epochs", c.epochs},
       {"arch", std::string(to_string(c.arch))},
       {"dataset", std::string(to_string(c.dataset))},
       {"budget", c.budget},
       {"colorizer", c.colorizer_path},
       {"seed", c.seed},
       {"lr0", c.lr0},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"width_scale", c.width_scale},
       {"augment", c.augment},
       {"self_supervised", c.self_supervised},
       {"proxy_classes", c.proxy_classes},
       {"max_steps", c.max_steps},
       {"checkpoint_dir", c.checkpoint_dir}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.omega = j.value("omega", d.omega);
  c.batch = j.value("batch", d.batch);
  c.epochs = j.value("epochs", d.epochs);
  c.arch = parse_arch(j.value("arch", std::string(to_string(d.arch))));
  c.dataset = parse_dataset(j.value("dataset", std::string(to_string(d.dataset))));
  c.budget = j.value("budget", d.budget);
  c.colorizer_path = j.value("colorizer", d.colorizer_path);
  c.seed = j.value("seed", d.seed);
  c.lr0 = j.value("lr0", d.lr0);
  c.momentum = j.value("momentum", d.momentum);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.width_scale = j.value("width_scale", d.width_scale);
  c.augment = j.value("augment", d.augment);
  c.self_supervised = j.value("self_supervised", d.self_supervised);
  c.proxy_classes = j.value("proxy_classes", d.proxy_classes);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.checkpoint_dir = j.value("checkpoint_dir", d.checkpoint_dir);
}

void BatchPair::validate() const {
  if (labels.size() != labeled_images.size()) throw ContractError("label count differs from labeled batch size");
  if (labeled_images.size() != unlabeled_images.size())
    throw ContractError("labeled batch has " + std::to_string(labeled_images.size()) +
                        " images but unlabeled batch has " + std::to_string(unlabeled_images.size()));
  if (labeled_images.empty()) throw ContractError("empty batch");
}

LossTerms composite_loss(DualHeadModel& model, const torch::Tensor& labeled, const torch::Tensor& labels,
                         const torch::Tensor& proxy, const torch::Tensor& proxy_labels, double omega) {
  if (labeled.size(0) != proxy.size(0))
    throw ContractError("labeled batch has " + std::to_string(labeled.size(0)) + " images but proxy batch has " +
                        std::to_string(proxy.size(0)));
  LossTerms terms;
  terms.l_super = cross_entropy(model->forward(labeled, Head::Supervised), labels);
  if (omega == 0.0) {
    torch::NoGradGuard no_grad;
    terms.l_self = cross_entropy(model->forward(proxy, Head::Self), proxy_labels);
    terms.total = terms.l_super;
  } else {
    terms.l_self = cross_entropy(model->forward(proxy, Head::Self), proxy_labels);
    terms.total = terms.l_super + omega * terms.l_self;
  }
  return terms;
}

namespace {

void backward_and_update(DualHeadModel& model, const torch::Tensor& total, OptimState& optim) {
  check_finite(total, "training loss at step " + std::to_string(optim.step));
  total.backward();
  for (const auto& p : model->named_parameters())
    if (p.value().grad().defined()) check_finite(p.value().grad(), "gradient of " + p.key());
  sgd_step(*model, optim);
}

}  // namespace

LossReport train_step(DualHeadModel& model, const torch::Tensor& labeled, const torch::Tensor& labels,
                      const torch::Tensor& proxy, const torch::Tensor& proxy_labels, double omega,
                      OptimState& optim) {
  model->zero_grad(/*set_to_none=*/true);
  auto terms = composite_loss(model, labeled, labels, proxy, proxy_labels, omega);
  LossReport report{terms.l_super.item<double>(), terms.l_self.item<double>(), terms.total.item<double>(),
                    optim.step};
  backward_and_update(model, terms.total, optim);
  return report;
}

LossReport supervised_step(DualHeadModel& model, const torch::Tensor& labeled, const torch::Tensor& labels,
                           OptimState& optim) {
  model->zero_grad(/*set_to_none=*/true);
  auto l_super = cross_entropy(model->forward(labeled, Head::Supervised), labels);
  LossReport report{l_super.item<double>(), 0.0, l_super.item<double>(), optim.step};
  backward_and_update(model, l_super, optim);
  return report;
}

std::int64_t planned_steps(const TrainConfig& config, std::size_t unlabeled_count) {
  auto per_epoch = static_cast<std::int64_t>((unlabeled_count + config.batch - 1) / config.batch);
  auto steps = per_epoch * config.epochs;
  return config.max_steps > 0 ? std::min(steps, config.max_steps) : steps;
}

torch::Tensor normalized_tensor(std::span<const Image> images, const ChannelStats& stats) {
  std::vector<Image> norm;
  norm.reserve(images.size());
  for (const auto& img : images) norm.push_back(normalize(img, stats));
  return images_to_tensor(norm);
}

Trainer::Trainer(const DatasetSplit& split, TrainConfig config, const ColorizerParams* colorizer)
    : split_(split),
      config_(std::move(config)),
      colorizer_(colorizer),
      cycler_(split.labeled.size(), static_cast<std::size_t>(std::max(config_.batch, 1)), config_.seed),
      unlabeled_(split.unlabeled.size(), static_cast<std::size_t>(std::max(config_.batch, 1)), config_.seed) {
  init_common();
  stats_ = compute_channel_stats(split_.unlabeled);
}

Trainer::Trainer(const DatasetSplit& split, const Checkpoint& checkpoint, const ColorizerParams* colorizer)
    : Trainer(split, checkpoint.config, colorizer) {
  restore_model(model_, checkpoint);
  optim_.step = checkpoint.step;
  optim_.momentum.clear();
  for (const auto& [name, buf] : checkpoint.momentum) optim_.momentum.emplace(name, buf.clone());
  stats_ = checkpoint.stats;
}

void Trainer::init_common() {
  config_.validate();
  if (split_.num_classes < 1) throw ConfigError("split has no classes");
  if (config_.self_supervised && config_.proxy_classes == kNumProxyClasses && colorizer_ == nullptr)
    throw ConfigError("all 7 proxy classes requested but no colorizer was provided");
  model_ = build_model({config_.arch, split_.num_classes, config_.seed, config_.width_scale});
  total_steps_ = planned_steps(config_, split_.unlabeled.size());
  optim_.options = {config_.lr0, config_.momentum, config_.weight_decay, std::max<std::int64_t>(total_steps_, 1)};
}

StepBatch Trainer::prepare(std::int64_t step) const {
  auto pair = batch_pair(step);
  StepBatch batch;
  batch.labeled = normalized_tensor(pair.labeled_images, stats_);
  batch.labels = torch::tensor(std::vector<std::int64_t>(pair.labels.begin(), pair.labels.end()), torch::kInt64);
  if (config_.self_supervised) {
    Rng rng = make_rng(config_.seed, Stream::Proxy, static_cast<std::uint64_t>(step));
    auto proxy = sample_proxy_batch(pair.unlabeled_images, rng, colorizer_, config_.proxy_classes);
    batch.proxy = normalized_tensor(proxy.images, stats_);
    std::vector<std::int64_t> codes;
    for (auto c : proxy.labels) codes.push_back(static_cast<std::int64_t>(c));
    batch.proxy_labels = torch::tensor(codes, torch::kInt64);
  }
  return batch;
}

BatchPair Trainer::batch_pair(std::int64_t step) const {
  BatchPair pair;
  Rng rng = make_rng(config_.seed, Stream::Augment, static_cast<std::uint64_t>(step));
  const bool flips = allows_hflip(config_.dataset);
  for (auto i : cycler_.indices_at(static_cast<std::uint64_t>(step))) {
    auto img = to_float(split_.labeled[i].image);
    pair.labeled_images.push_back(config_.augment ? augment_labeled(img, rng, flips) : std::move(img));
    pair.labels.push_back(split_.labeled[i].label);
  }
  if (config_.self_supervised) {
    for (auto i : unlabeled_.indices_at(static_cast<std::uint64_t>(step)))
      pair.unlabeled_images.push_back(to_float(split_.unlabeled[i]));
    pair.validate();
  }
  return pair;
}

LossReport Trainer::step() {
  if (finished()) throw ContractError("training already finished");
  const auto s = optim_.step;
  auto batch = prepare(s);
  torch::manual_seed(derive_seed(config_.seed, Stream::Torch, static_cast<std::uint64_t>(s)));
  model_->train();
  if (!config_.self_supervised) return supervised_step(model_, batch.labeled, batch.labels, optim_);
  return train_step(model_, batch.labeled, batch.labels, batch.proxy, batch.proxy_labels, config_.omega, optim_);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.step = optim_.step;
  c.stats = stats_;
  for (const auto& p : model_->named_parameters()) c.model_state.push_back({"param." + p.key(), p.value().detach().clone()});
  for (const auto& b : model_->named_buffers()) c.model_state.push_back({"buffer." + b.key(), b.value().detach().clone()});
  for (const auto& [name, buf] : optim_.momentum) c.momentum.emplace(name, buf.clone());
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file) {
  nlohmann::json meta = {{"kind", "train"},
                         {"config", checkpoint.config},
                         {"step", checkpoint.step},
                         {"stats", {{"mean", checkpoint.stats.mean}, {"std", checkpoint.stats.stddev}}},
                         // Every random stream is derived from (seed, step).
                         {"rng", {{"seed", checkpoint.config.seed}, {"next_step", checkpoint.step}}}};
  TensorArchive archive;
  archive.config = meta.dump();
  archive.tensors = checkpoint.model_state;
  for (const auto& [name, buf] : checkpoint.momentum) archive.tensors.push_back({"momentum." + name, buf});
  write_archive(file, archive);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  auto archive = read_archive(file);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(archive.config);
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt checkpoint " + file.string() + ": unreadable config snapshot");
  }
  if (meta.value("kind", "") != "train") throw DataError(file.string() + " is not a training checkpoint");
  Checkpoint c;
  c.config = meta.at("config").get<TrainConfig>();
  c.step = meta.at("step").get<std::int64_t>();
  c.stats.mean = meta.at("stats").at("mean").get<std::vector<float>>();
  c.stats.stddev = meta.at("stats").at("std").get<std::vector<float>>();
  const std::string momentum_prefix = "momentum.";
  for (auto& t : archive.tensors) {
    if (t.name.starts_with(momentum_prefix))
      c.momentum.emplace(t.name.substr(momentum_prefix.size()), t.tensor);
    else
      c.model_state.push_back(std::move(t));
  }
  return c;
}

void restore_model(DualHeadModel& model, const Checkpoint& checkpoint) {
  const std::string want = std::string(to_string(checkpoint.config.arch));
  if (model->arch_tag() != want)
    throw ConfigError("checkpoint architecture '" + want + "' is incompatible with model '" + model->arch_tag() + "'");
  torch::NoGradGuard no_grad;
  std::size_t expected = 0;
  auto copy_into = [&](const std::string& name, torch::Tensor dst) {
    ++expected;
    for (const auto& t : checkpoint.model_state)
      if (t.name == name) {
        if (t.tensor.sizes() != dst.sizes())
          throw ConfigError("checkpoint tensor '" + name + "' has an incompatible shape");
        dst.copy_(t.tensor);
        return;
      }
    throw ConfigError("checkpoint is missing tensor '" + name + "'");
  };
  for (auto& p : model->named_parameters()) copy_into("param." + p.key(), p.value());
  for (auto& b : model->named_buffers()) copy_into("buffer." + b.key(), b.value());
  if (expected != checkpoint.model_state.size())
    throw ConfigError("checkpoint holds tensors this model does not have");
}

TrainResult continue_training(Trainer& trainer, const TrainObserver& observer) {
  TrainResult result;
  const auto per_epoch = trainer.steps_per_epoch();
  const auto& dir = trainer.config().checkpoint_dir;
  if (!dir.empty()) std::filesystem::create_directories(dir);
  while (!trainer.finished()) {
    auto report = trainer.step();
    result.trace.push_back(report);
    if (observer.on_step) observer.on_step(report);
    const auto done = trainer.steps_done();
    if (done % per_epoch == 0 || trainer.finished()) {
      int epoch = static_cast<int>((done + per_epoch - 1) / per_epoch);
      if (!dir.empty())
        save_checkpoint(trainer.checkpoint(), std::filesystem::path(dir) / ("epoch-" + std::to_string(epoch) + ".ckpt"));
      if (observer.on_epoch) observer.on_epoch(epoch, trainer);
    }
  }
  result.model = trainer.model();
  result.stats = trainer.stats();
  return result;
}

TrainResult train_loop(const DatasetSplit& split, const TrainConfig& config, const ColorizerParams* colorizer,
                       const TrainObserver& observer) {
  Trainer trainer(split, config, colorizer);
  return continue_training(trainer, observer);
}

double error_rate(const torch::Tensor& logits, std::span<const int> labels) {
  if (labels.empty()) throw DataError("cannot evaluate on an empty test set");
  if (logits.size(0) != static_cast<std::int64_t>(labels.size()))
    throw ContractError("logit rows differ from label count");
  auto pred = argmax_rows(logits);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += pred[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double evaluate(DualHeadModel& model, std::span<const LabeledExample> test, const ChannelStats& stats, int batch) {
  if (test.empty()) throw DataError("cannot evaluate on an empty test set");
  torch::NoGradGuard no_grad;
  model->eval();
  std::size_t wrong = 0;
  for (std::size_t start = 0; start < test.size(); start += static_cast<std::size_t>(batch)) {
    auto end = std::min(test.size(), start + static_cast<std::size_t>(batch));
    std::vector<Image> imgs;
    std::vector<int> labels;
    for (auto i = start; i < end; ++i) {
      imgs.push_back(to_float(test[i].image));
      labels.push_back(test[i].label);
    }
    auto logits = model->forward(normalized_tensor(imgs, stats), Head::Supervised);
    wrong += static_cast<std::size_t>(std::llround(error_rate(logits, labels) * static_cast<double>(labels.size())));
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

EvalReport aggregate_runs(std::span<const double> errors) {
  if (errors.empty()) throw ContractError("no runs to aggregate");
  EvalReport r;
  r.errors.assign(errors.begin(), errors.end());
  double sum = 0.0;
  for (double e : errors) sum += e;
  r.mean = sum / static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - r.mean) * (e - r.mean);
  r.std = std::sqrt(var / static_cast<double>(errors.size()));
  return r;
}

std::string format_cell(const EvalReport& report) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", report.mean * 100.0, report.std * 100.0);
  return buf;
}

}  // namespace cs4l
