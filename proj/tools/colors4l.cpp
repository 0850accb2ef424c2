// colors4l: dataset conversion, colorizer pretraining, label-budget experiments
// and result tables.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "cs4l/colorizer.hpp"
#include "cs4l/config_file.hpp"
#include "cs4l/data.hpp"
#include "cs4l/errors.hpp"
#include "cs4l/experiment.hpp"
#include "cs4l/mat_v5.hpp"
#include "cs4l/trainer.hpp"

namespace fs = std::filesystem;
using namespace cs4l;

namespace {

struct Flags {
  std::string dataset = "cifar10";
  std::string data_dir;
  std::string arch = "convnet13";
  std::vector<std::size_t> budgets;
  std::vector<std::uint64_t> seeds;
  double omega = 1.0;
  int epochs = 30;
  int batch = 128;
  std::string colorizer;
  std::string out;
  std::string config;
  double lr = 0.05;
  double lr_colorizer = 1e-3;
  double width_scale = 1.0;
  int proxy_classes = 7;
  std::int64_t max_steps = 0;
  std::size_t limit = 0;
  // Config-file only.
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool augment = true;
};

struct Options {
  CLI::Option* dataset = nullptr;
  CLI::Option* data_dir = nullptr;
  CLI::Option* arch = nullptr;
  CLI::Option* budget = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* omega = nullptr;
  CLI::Option* epochs = nullptr;
  CLI::Option* batch = nullptr;
  CLI::Option* colorizer = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* lr = nullptr;
  CLI::Option* width_scale = nullptr;
  CLI::Option* proxy_classes = nullptr;
  CLI::Option* max_steps = nullptr;
};

void add_dataset_flags(CLI::App* cmd, Flags& f, Options& o) {
  o.dataset = cmd->add_option("--dataset", f.dataset, "cifar10, cifar100 or svhn")
                  ->check(CLI::IsMember({"cifar10", "cifar100", "svhn"}));
  o.data_dir = cmd->add_option("--data-dir", f.data_dir, "dataset directory (default: $COLORS4L_DATA)");
}

std::string data_dir_or_env(const Flags& f) {
  if (!f.data_dir.empty()) return f.data_dir;
  if (const char* env = std::getenv("COLORS4L_DATA")) return env;
  throw ConfigError("no --data-dir given and COLORS4L_DATA is not set");
}

void apply_config_file(const Flags& f, Flags& target, const Options& o) {
  if (f.config.empty()) return;
  auto values = read_config_file(f.config);
  auto given = [](CLI::Option* opt) { return opt != nullptr && opt->count() > 0; };
  for (const auto& [key, list] : values) {
    const std::string& v = list.back();
    try {
      if (key == "dataset" && !given(o.dataset)) target.dataset = v;
      else if (key == "data_dir" && !given(o.data_dir)) target.data_dir = v;
      else if (key == "arch" && !given(o.arch)) target.arch = v;
      else if (key == "budget" && !given(o.budget)) {
        target.budgets.clear();
        for (const auto& b : list) target.budgets.push_back(std::stoull(b));
      } else if (key == "seed" && !given(o.seed)) {
        target.seeds.clear();
        for (const auto& s : list) target.seeds.push_back(std::stoull(s));
      } else if (key == "omega" && !given(o.omega)) target.omega = std::stod(v);
      else if (key == "epochs" && !given(o.epochs)) target.epochs = std::stoi(v);
      else if (key == "batch" && !given(o.batch)) target.batch = std::stoi(v);
      else if (key == "colorizer" && !given(o.colorizer)) target.colorizer = v;
      else if (key == "out" && !given(o.out)) target.out = v;
      else if (key == "lr" && !given(o.lr)) target.lr = std::stod(v);
      else if (key == "width_scale" && !given(o.width_scale)) target.width_scale = std::stod(v);
      else if (key == "proxy_classes" && !given(o.proxy_classes)) target.proxy_classes = std::stoi(v);
      else if (key == "max_steps" && !given(o.max_steps)) target.max_steps = std::stoll(v);
      else if (key == "momentum") target.momentum = std::stod(v);
      else if (key == "weight_decay") target.weight_decay = std::stod(v);
      else if (key == "augment") {
        if (v != "true" && v != "false") throw std::invalid_argument(v);
        target.augment = v == "true";
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key '" + key + "' has an invalid value '" + v + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("config key '" + key + "' is out of range");
    }
  }
}

int cmd_convert(const Flags& f) {
  const auto kind = parse_dataset(f.dataset);
  const fs::path src = data_dir_or_env(f);
  const fs::path out = f.out.empty() ? src : fs::path(f.out);
  fs::create_directories(out);
  Container train, test;
  switch (kind) {
    case DatasetKind::Cifar10:
    case DatasetKind::Cifar100: {
      auto ds = load_dataset(kind, src);
      train = to_container(ds.train);
      test = to_container(ds.test);
      break;
    }
    case DatasetKind::Svhn:
      train = read_svhn_mat(src / "train_32x32.mat");
      test = read_svhn_mat(src / "test_32x32.mat");
      break;
  }
  const std::string prefix(to_string(kind));
  write_container(out / (prefix + "_train.cds"), train);
  write_container(out / (prefix + "_test.cds"), test);
  std::cout << "wrote " << (out / (prefix + "_train.cds")).string() << " (" << train.images.size() << " images)\n"
            << "wrote " << (out / (prefix + "_test.cds")).string() << " (" << test.images.size() << " images)\n";
  return 0;
}

int cmd_pretrain(const Flags& f) {
  const auto kind = parse_dataset(f.dataset);
  auto ds = load_dataset(kind, data_dir_or_env(f));
  std::vector<Image> images;
  std::size_t n = f.limit > 0 ? std::min(f.limit, ds.train.size()) : ds.train.size();
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) images.push_back(to_float(ds.train[i].image));

  ColorizerConfig cfg;
  cfg.epochs = f.epochs;
  cfg.batch = f.batch;
  cfg.learning_rate = f.lr_colorizer;
  cfg.seed = f.seeds.empty() ? 0 : f.seeds.front();
  auto params = train_colorizer(images, cfg, std::string(to_string(kind)), [](int epoch, double loss, const ColorizerParams&) {
    std::cout << "epoch " << epoch << " loss " << loss << std::endl;
  });
  const fs::path out = f.out.empty() ? fs::path(".") : fs::path(f.out);
  fs::create_directories(out);
  auto file = out / colorizer_artifact_name(params.dataset, params.epochs);
  save_colorizer(params, file);
  std::cout << "wrote " << file.string() << "\n";
  return 0;
}

int cmd_run(const Flags& f) {
  ExperimentSpec spec;
  spec.dataset = parse_dataset(f.dataset);
  spec.budgets = f.budgets;
  spec.seeds = f.seeds;
  spec.out_dir = f.out.empty() ? fs::path("results") : fs::path(f.out);
  spec.base.arch = parse_arch(f.arch);
  spec.base.omega = f.omega;
  spec.base.epochs = f.epochs;
  spec.base.batch = f.batch;
  spec.base.lr0 = f.lr;
  spec.base.momentum = f.momentum;
  spec.base.weight_decay = f.weight_decay;
  spec.base.augment = f.augment;
  spec.base.width_scale = f.width_scale;
  spec.base.proxy_classes = f.proxy_classes;
  spec.base.max_steps = f.max_steps;
  spec.base.colorizer_path = f.colorizer;
  // omega = 0 is the supervised baseline; its proxy branch would not move the weights.
  spec.base.self_supervised = f.omega > 0.0;
  spec.validate();

  std::optional<ColorizerParams> colorizer;
  if (spec.base.self_supervised && spec.base.proxy_classes == kNumProxyClasses) {
    fs::path path = f.colorizer;
    if (path.empty()) {
      path = fs::path(data_dir_or_env(f)) / default_colorizer_name(spec.dataset);
      if (!fs::exists(path))
        throw ConfigError("no --colorizer given and the default " + path.string() +
                          " does not exist (run pretrain-colorizer or pass --proxy-classes 6)");
    }
    colorizer = load_colorizer(path);
    spec.base.colorizer_path = path.string();
  }
  spec.data_dir = data_dir_or_env(f);
  auto dataset = load_dataset(spec.dataset, spec.data_dir);
  for (auto b : spec.budgets)
    if (b > dataset.train.size())
      throw ConfigError("budget " + std::to_string(b) + " exceeds the " + std::to_string(dataset.train.size()) +
                        " training images");

  auto outcomes = run_experiment(spec, dataset, colorizer ? &*colorizer : nullptr,
                                 [](const std::string& line) { std::cout << line << std::endl; });
  int code = 0;
  for (const auto& o : outcomes)
    if (o.exit_code != 0) code = std::max(code, o.exit_code);
  return code;
}

int cmd_report(const Flags& f) {
  const fs::path dir = f.out.empty() ? fs::path("results") : fs::path(f.out);
  auto records = read_records(dir);
  auto tables = build_tables(records, f.budgets);
  const fs::path report_dir = dir / "report";
  fs::create_directories(report_dir / "plots");
  for (const auto& t : tables) {
    auto text = render_text(t);
    std::cout << text << '\n';
    std::ofstream(report_dir / (t.dataset + ".txt")) << text;
    std::ofstream(report_dir / (t.dataset + ".csv")) << render_csv(t);
  }
  for (const auto& r : records) {
    auto stem = record_path(dir, r).stem().string();
    std::ofstream(report_dir / "plots" / (stem + ".svg")) << loss_curve_svg(r);
  }
  std::cout << "wrote " << report_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised training with rotation, flip and colorization proxy tasks"};
  app.require_subcommand(1);
  Flags flags;

  Options convert_opts;
  auto* convert = app.add_subcommand("convert", "convert official dataset files to CDS1 containers");
  add_dataset_flags(convert, flags, convert_opts);
  convert->add_option("--out", flags.out, "output directory (default: the data directory)");

  Options pre_opts;
  auto* pretrain = app.add_subcommand("pretrain-colorizer", "train the grayscale-to-RGB colorizer");
  add_dataset_flags(pretrain, flags, pre_opts);
  pretrain->add_option("--epochs", flags.epochs, "training epochs")->check(CLI::PositiveNumber);
  pretrain->add_option("--batch", flags.batch, "mini-batch size")->check(CLI::PositiveNumber);
  pretrain->add_option("--lr", flags.lr_colorizer, "Adam learning rate");
  pretrain->add_option("--seed", flags.seeds, "random seed");
  pretrain->add_option("--limit", flags.limit, "use only the first N training images");
  pretrain->add_option("--out", flags.out, "directory for <dataset>-<epochs>-color");

  Options run_opts;
  auto* run = app.add_subcommand("run", "train and evaluate every (budget, seed) pair");
  add_dataset_flags(run, flags, run_opts);
  run_opts.arch = run->add_option("--arch", flags.arch, "convnet13 or wrn_28_4")
                      ->check(CLI::IsMember({"convnet13", "wrn_28_4"}));
  run_opts.budget = run->add_option("--budget", flags.budgets, "labeled examples (repeatable)");
  run_opts.seed = run->add_option("--seed", flags.seeds, "seed (repeatable)");
  run_opts.omega = run->add_option("--omega", flags.omega, "self-supervised loss weight; 0 = supervised baseline");
  run_opts.epochs = run->add_option("--epochs", flags.epochs, "passes over the unlabeled set");
  run_opts.batch = run->add_option("--batch", flags.batch, "mini-batch size per branch");
  run_opts.colorizer = run->add_option("--colorizer", flags.colorizer, "colorizer checkpoint");
  run_opts.out = run->add_option("--out", flags.out, "results directory");
  run_opts.lr = run->add_option("--lr", flags.lr, "initial SGD learning rate");
  run_opts.width_scale = run->add_option("--width-scale", flags.width_scale, "channel multiplier for the backbone");
  run_opts.proxy_classes = run->add_option("--proxy-classes", flags.proxy_classes, "7 with colorization, 6 without")
                               ->check(CLI::IsMember({6, 7}));
  run_opts.max_steps = run->add_option("--max-steps", flags.max_steps, "stop after N steps");
  run->add_option("--config", flags.config, "key = value config file; flags take precedence");

  Options report_opts;
  auto* report = app.add_subcommand("report", "render result tables, CSV and loss plots");
  report->add_option("--out", flags.out, "results directory");
  report->add_option("--budget", flags.budgets, "columns to show (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  torch::set_num_threads(std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
  try {
    if (*convert) return cmd_convert(flags);
    if (*pretrain) return cmd_pretrain(flags);
    if (*run) {
      apply_config_file(flags, flags, run_opts);
      if (flags.seeds.empty()) throw ConfigError("at least one --seed is required");
      if (flags.budgets.empty()) throw ConfigError("at least one --budget is required");
      return cmd_run(flags);
    }
    if (*report) return cmd_report(flags);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
