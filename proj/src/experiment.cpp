#include "cs4l/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cs4l/errors.hpp"

namespace cs4l {
namespace fs = std::filesystem;

void ExperimentSpec::validate() const {
  if (budgets.empty()) throw ConfigError("at least one --budget is required");
  if (seeds.empty()) throw ConfigError("at least one --seed is required");
  base.validate();
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = {{"dataset", r.dataset},       {"arch", r.arch},
       {"method", r.method},         {"budget", r.budget},
       {"seed", r.seed},             {"error_rate", r.error_rate},
       {"steps", r.steps},           {"first_loss", r.first_loss},
       {"final_loss", r.final_loss}, {"epoch_loss", r.epoch_loss},
       {"config", r.config}};
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  j.at("dataset").get_to(r.dataset);
  j.at("arch").get_to(r.arch);
  j.at("method").get_to(r.method);
  j.at("budget").get_to(r.budget);
  j.at("seed").get_to(r.seed);
  j.at("error_rate").get_to(r.error_rate);
  r.steps = j.value("steps", std::int64_t{0});
  r.first_loss = j.value("first_loss", 0.0);
  r.final_loss = j.value("final_loss", 0.0);
  r.epoch_loss = j.value("epoch_loss", std::vector<double>{});
  r.config = j.value("config", nlohmann::json::object());
}

std::string method_name(const TrainConfig& config) {
  return (config.self_supervised && config.omega > 0.0) ? "colors4l" : "supervised";
}

std::string default_colorizer_name(DatasetKind dataset) {
  switch (dataset) {
    case DatasetKind::Cifar10: return colorizer_artifact_name("cifar10", 300);
    case DatasetKind::Svhn: return colorizer_artifact_name("cifar10", 100);
    case DatasetKind::Cifar100: return colorizer_artifact_name("cifar100", 100);
  }
  throw ContractError("unknown dataset kind");
}

RunRecord make_record(const TrainConfig& config, const std::vector<LossReport>& trace, std::int64_t steps_per_epoch,
                      double error_rate) {
  RunRecord r;
  r.dataset = std::string(to_string(config.dataset));
  r.arch = std::string(to_string(config.arch));
  r.method = method_name(config);
  r.budget = config.budget;
  r.seed = config.seed;
  r.error_rate = error_rate;
  r.steps = static_cast<std::int64_t>(trace.size());
  if (!trace.empty()) {
    r.first_loss = trace.front().total;
    r.final_loss = trace.back().total;
  }
  for (std::size_t start = 0; start < trace.size(); start += static_cast<std::size_t>(steps_per_epoch)) {
    auto end = std::min(trace.size(), start + static_cast<std::size_t>(steps_per_epoch));
    double sum = 0.0;
    for (auto i = start; i < end; ++i) sum += trace[i].total;
    r.epoch_loss.push_back(sum / static_cast<double>(end - start));
  }
  r.config = config;
  return r;
}

fs::path record_path(const fs::path& out_dir, const RunRecord& r) {
  return out_dir / "runs" /
         (r.dataset + "_" + r.method + "_" + r.arch + "_" + std::to_string(r.budget) + "L_seed" +
          std::to_string(r.seed) + ".jsonl");
}

void append_record(const fs::path& out_dir, const RunRecord& record) {
  auto path = record_path(out_dir, record);
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to " + path.string());
  out << nlohmann::json(record).dump() << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<RunRecord> read_records(const fs::path& out_dir) {
  fs::path dir = out_dir / "runs";
  if (!fs::is_directory(dir)) dir = out_dir;
  if (!fs::is_directory(dir)) throw DataError("no results directory at " + out_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(nlohmann::json::parse(line).get<RunRecord>());
      } catch (const nlohmann::json::exception& e) {
        throw DataError(f.string() + ":" + std::to_string(lineno) + ": malformed record (" + e.what() + ")");
      }
    }
  }
  if (records.empty()) throw DataError("no run records found under " + out_dir.string());
  return records;
}

std::vector<RunOutcome> run_experiment(const ExperimentSpec& spec, const Dataset& dataset,
                                       const ColorizerParams* colorizer, const RunLogger& log) {
  spec.validate();
  std::vector<RunOutcome> outcomes;
  for (auto budget : spec.budgets)
    for (auto seed : spec.seeds) {
      RunOutcome outcome{budget, seed, std::nullopt, "", 0};
      try {
        TrainConfig config = spec.base;
        config.dataset = dataset.kind;
        config.budget = budget;
        config.seed = seed;
        auto split = make_split(dataset, budget, seed);
        Trainer trainer(split, config, colorizer);
        TrainObserver observer;
        double epoch_sum = 0.0;
        std::int64_t epoch_steps = 0;
        observer.on_step = [&](const LossReport& r) {
          epoch_sum += r.total;
          ++epoch_steps;
        };
        observer.on_epoch = [&](int epoch, Trainer&) {
          if (log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "[%zuL seed %llu] epoch %d mean loss %.4f", budget,
                          static_cast<unsigned long long>(seed), epoch, epoch_sum / std::max<std::int64_t>(epoch_steps, 1));
            log(buf);
          }
          epoch_sum = 0.0;
          epoch_steps = 0;
        };
        auto result = continue_training(trainer, observer);
        double err = evaluate(result.model, split.test, result.stats);
        auto record = make_record(config, result.trace, trainer.steps_per_epoch(), err);
        append_record(spec.out_dir, record);
        if (log) {
          char buf[120];
          std::snprintf(buf, sizeof buf, "[%zuL seed %llu] test error %.2f%%", budget,
                        static_cast<unsigned long long>(seed), err * 100.0);
          log(buf);
        }
        outcome.record = std::move(record);
      } catch (const NumericError& e) {
        outcome.error = e.what();
        outcome.exit_code = 3;
      } catch (const DataError& e) {
        outcome.error = e.what();
        outcome.exit_code = 2;
      } catch (const std::exception& e) {
        outcome.error = e.what();
        outcome.exit_code = 1;
      }
      if (!outcome.error.empty() && log) log("[" + std::to_string(budget) + "L seed " + std::to_string(seed) + "] failed: " + outcome.error);
      outcomes.push_back(std::move(outcome));
    }
  return outcomes;
}

std::vector<ResultTable> build_tables(const std::vector<RunRecord>& records,
                                      const std::vector<std::size_t>& requested_budgets) {
  // dataset -> (row, budget) -> seed -> error; later records replace earlier ones.
  std::map<std::string, std::map<std::pair<std::string, std::size_t>, std::map<std::uint64_t, double>>> grouped;
  for (const auto& r : records) grouped[r.dataset][{r.method + "(" + r.arch + ")", r.budget}][r.seed] = r.error_rate;

  std::vector<ResultTable> tables;
  for (const auto& [dataset, cells] : grouped) {
    ResultTable t;
    t.dataset = dataset;
    std::set<std::string> rows;
    std::set<std::size_t> present;
    for (const auto& [key, _] : cells) {
      rows.insert(key.first);
      present.insert(key.second);
    }
    if (requested_budgets.empty()) {
      t.budgets.assign(present.begin(), present.end());
    } else {
      for (auto b : requested_budgets) {
        if (std::find(t.budgets.begin(), t.budgets.end(), b) != t.budgets.end()) continue;
        if (present.count(b))
          t.budgets.push_back(b);
        else
          t.footnotes.push_back("* " + std::to_string(b) + "L omitted: no records");
      }
    }
    t.rows.assign(rows.begin(), rows.end());
    for (const auto& [key, by_seed] : cells) {
      if (std::find(t.budgets.begin(), t.budgets.end(), key.second) == t.budgets.end()) continue;
      std::vector<double> errs;
      for (const auto& [seed, e] : by_seed) errs.push_back(e);
      t.cells.emplace(key, aggregate_runs(errs));
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

namespace {

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t width) {
  auto w = display_width(s);
  return s + std::string(width > w ? width - w : 0, ' ');
}

constexpr const char* kEmptyCell = "------";

}  // namespace

std::string render_text(const ResultTable& t) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Method(" + t.dataset + ")"});
  for (auto b : t.budgets) grid[0].push_back(std::to_string(b) + "L");
  for (const auto& row : t.rows) {
    std::vector<std::string> line{row};
    for (auto b : t.budgets) {
      auto it = t.cells.find({row, b});
      line.push_back(it == t.cells.end() ? kEmptyCell : format_cell(it->second));
    }
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(grid[0].size(), 0);
  for (const auto& line : grid)
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], display_width(line[i]));
  std::ostringstream out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) out << "  ";
      out << (i + 1 == line.size() ? line[i] : pad(line[i], widths[i]));
    }
    out << '\n';
  }
  for (const auto& f : t.footnotes) out << f << '\n';
  return out.str();
}

std::string render_csv(const ResultTable& t) {
  std::ostringstream out;
  out << "dataset,method,budget,mean_percent,std_percent,runs,cell\n";
  char buf[64];
  for (const auto& row : t.rows)
    for (auto b : t.budgets) {
      auto it = t.cells.find({row, b});
      if (it == t.cells.end()) continue;
      const auto& r = it->second;
      out << t.dataset << ',' << row << ',' << b << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.mean * 100.0);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.std * 100.0);
      out << buf << ',' << r.errors.size() << ',' << format_cell(r) << '\n';
    }
  return out.str();
}

std::vector<CsvCell> parse_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<CsvCell> cells;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 7) throw DataError("malformed CSV line: " + line);
    cells.push_back({f[1], std::stoull(f[2]), std::stod(f[3]), std::stod(f[4]), std::stoi(f[5])});
  }
  return cells;
}

std::string loss_curve_svg(const RunRecord& r) {
  constexpr double W = 640, H = 360, L = 60, R = 20, T = 40, B = 50;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << r.dataset << " " << r.method << "(" << r.arch << ") " << r.budget << "L seed " << r.seed << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">epoch</text>\n";
  if (!r.epoch_loss.empty()) {
    auto [lo_it, hi_it] = std::minmax_element(r.epoch_loss.begin(), r.epoch_loss.end());
    double lo = std::min(0.0, *lo_it), hi = *hi_it > lo ? *hi_it : lo + 1.0;
    auto n = r.epoch_loss.size();
    auto px = [&](std::size_t i) { return n == 1 ? (L + W - R) / 2 : L + (W - L - R) * static_cast<double>(i) / static_cast<double>(n - 1); };
    auto py = [&](double v) { return H - B - (H - T - B) * (v - lo) / (hi - lo); };
    char buf[64];
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(i), py(r.epoch_loss[i]));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf, "%.3f", hi);
    out << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3f", lo);
    out << "<text x=\"" << L - 6 << "\" y=\"" << H - B + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace cs4l
