#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cs4l/trainer.hpp"

namespace cs4l {

struct ExperimentSpec {
  DatasetKind dataset = DatasetKind::Cifar10;
  std::filesystem::path data_dir;
  std::vector<std::size_t> budgets;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir = "results";
  TrainConfig base;  // arch, omega, epochs, batch, colorizer, optimizer overrides

  void validate() const;
};

// One finished (budget, seed) run, persisted as a single JSON line.
struct RunRecord {
  std::string dataset;
  std::string arch;
  std::string method;  // "colors4l" or "supervised"
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  double error_rate = 0.0;
  std::int64_t steps = 0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;  // mean total loss per epoch
  nlohmann::json config;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

std::string method_name(const TrainConfig& config);

// Colorizer artifact paired with each dataset by default:
// cifar10 -> cifar10-300-color, svhn -> cifar10-100-color, cifar100 -> cifar100-100-color.
std::string default_colorizer_name(DatasetKind dataset);
RunRecord make_record(const TrainConfig& config, const std::vector<LossReport>& trace, std::int64_t steps_per_epoch,
                      double error_rate);

// Records live in <out>/runs/, one file per (dataset, method, arch, budget, seed),
// appended to and never rewritten.
std::filesystem::path record_path(const std::filesystem::path& out_dir, const RunRecord& record);
void append_record(const std::filesystem::path& out_dir, const RunRecord& record);
std::vector<RunRecord> read_records(const std::filesystem::path& out_dir);

struct RunOutcome {
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::optional<RunRecord> record;
  std::string error;  // set when the run failed
  int exit_code = 0;
};

using RunLogger = std::function<void(const std::string&)>;

// Train and evaluate every (budget, seed) pair; failures are recorded and the
// remaining runs continue.
std::vector<RunOutcome> run_experiment(const ExperimentSpec& spec, const Dataset& dataset,
                                       const ColorizerParams* colorizer, const RunLogger& log = {});

struct ResultTable {
  std::string dataset;
  std::vector<std::string> rows;       // "<method>(<arch>)"
  std::vector<std::size_t> budgets;    // column order
  std::map<std::pair<std::string, std::size_t>, EvalReport> cells;
  std::vector<std::string> footnotes;
};

// Groups records by dataset. Requested budgets without any record are left
// out and noted in a footnote; an empty request means every budget present.
std::vector<ResultTable> build_tables(const std::vector<RunRecord>& records,
                                      const std::vector<std::size_t>& requested_budgets = {});

std::string render_text(const ResultTable& table);
std::string render_csv(const ResultTable& table);

struct CsvCell {
  std::string row;
  std::size_t budget = 0;
  double mean_percent = 0.0;
  double std_percent = 0.0;
  int runs = 0;
};
std::vector<CsvCell> parse_csv(const std::string& csv);

// Line plot of the per-epoch mean loss as a standalone SVG.
std::string loss_curve_svg(const RunRecord& record);

}  // namespace cs4l
