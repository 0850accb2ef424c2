#include <doctest.h>

#include <fstream>

#include "cs4l/config_file.hpp"
#include "cs4l/experiment.hpp"
#include "synthetic.hpp"

using namespace cs4l;
namespace fs = std::filesystem;

namespace {

RunRecord record(const std::string& method, std::size_t budget, std::uint64_t seed, double err) {
  RunRecord r;
  r.dataset = "cifar10";
  r.arch = "convnet13";
  r.method = method;
  r.budget = budget;
  r.seed = seed;
  r.error_rate = err;
  r.epoch_loss = {2.0, 1.5, 1.2};
  return r;
}

}  // namespace

TEST_CASE("method names") {
  TrainConfig c;
  CHECK(method_name(c) == "colors4l");
  c.omega = 0.0;
  CHECK(method_name(c) == "supervised");
  c.omega = 1.0;
  c.self_supervised = false;
  CHECK(method_name(c) == "supervised");
}

TEST_CASE("default colorizer pairing") {
  CHECK(default_colorizer_name(DatasetKind::Cifar10) == "cifar10-300-color");
  CHECK(default_colorizer_name(DatasetKind::Svhn) == "cifar10-100-color");
  CHECK(default_colorizer_name(DatasetKind::Cifar100) == "cifar100-100-color");
}

TEST_CASE("make_record averages the loss per epoch") {
  TrainConfig c;
  std::vector<LossReport> trace;
  for (int i = 0; i < 6; ++i) trace.push_back({0, 0, static_cast<double>(i), i});
  auto r = make_record(c, trace, 3, 0.25);
  CHECK(r.epoch_loss == std::vector<double>{1.0, 4.0});
  CHECK(r.steps == 6);
  CHECK(r.first_loss == 0.0);
  CHECK(r.final_loss == 5.0);
  CHECK(r.error_rate == 0.25);
}

TEST_CASE("records append and read back") {
  auto dir = testing::temp_dir("records");
  CHECK_THROWS_AS(read_records(dir), DataError);
  auto a = record("colors4l", 1000, 1, 0.2);
  append_record(dir, a);
  append_record(dir, record("colors4l", 1000, 2, 0.3));
  CHECK(record_path(dir, a).filename() == "cifar10_colors4l_convnet13_1000L_seed1.jsonl");
  auto back = read_records(dir);
  REQUIRE(back.size() == 2);
  CHECK(back[0].error_rate == 0.2);
  CHECK(back[0].epoch_loss == a.epoch_loss);

  std::ofstream(dir / "runs" / "broken.jsonl") << "{not json\n";
  CHECK_THROWS_AS(read_records(dir), DataError);
}

TEST_CASE("tables aggregate seeds into mean±std cells") {
  std::vector<RunRecord> recs{record("colors4l", 1000, 1, 0.10), record("colors4l", 1000, 2, 0.30),
                              record("supervised", 1000, 1, 0.5), record("colors4l", 4000, 1, 0.1)};
  auto tables = build_tables(recs, {1000, 2000, 4000});
  REQUIRE(tables.size() == 1);
  const auto& t = tables[0];
  CHECK(t.budgets == std::vector<std::size_t>{1000, 4000});
  REQUIRE(t.footnotes.size() == 1);
  CHECK(t.footnotes[0] == "* 2000L omitted: no records");
  CHECK(format_cell(t.cells.at({"colors4l(convnet13)", 1000})) == "20.00±10.00");

  auto text = render_text(t);
  CHECK(text.find("20.00±10.00") != std::string::npos);
  CHECK(text.find("1000L") != std::string::npos);
  CHECK(text.find("------") != std::string::npos);  // supervised has no 4000L run
  CHECK(text.find("* 2000L omitted") != std::string::npos);

  // A rerun of the same seed replaces the earlier value.
  recs.push_back(record("supervised", 1000, 1, 0.4));
  CHECK(format_cell(build_tables(recs)[0].cells.at({"supervised(convnet13)", 1000})) == "40.00±0.00");
}

TEST_CASE("CSV round trip is exact") {
  std::vector<RunRecord> recs;
  Rng rng(3);
  for (std::uint64_t s = 0; s < 5; ++s)
    recs.push_back(record("colors4l", 250, s, static_cast<double>(rng() % 1000000) / 1e6));
  auto t = build_tables(recs)[0];
  auto cells = parse_csv(render_csv(t));
  REQUIRE(cells.size() == 1);
  const auto& r = t.cells.at({"colors4l(convnet13)", 250});
  CHECK(cells[0].row == "colors4l(convnet13)");
  CHECK(cells[0].budget == 250);
  CHECK(cells[0].mean_percent == r.mean * 100.0);
  CHECK(cells[0].std_percent == r.std * 100.0);
  CHECK(cells[0].runs == 5);
  CHECK_THROWS_AS(parse_csv("h\n1,2\n"), DataError);
}

TEST_CASE("loss curve SVG") {
  auto svg = loss_curve_svg(record("colors4l", 1000, 1, 0.2));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("config files") {
  auto v = parse_config_text("# comment\ndataset = cifar10\nbudget = 1000, 2000\nbudget=4000\nseed = 1,2 # trailing\n\n");
  CHECK(v["dataset"] == std::vector<std::string>{"cifar10"});
  CHECK(v["budget"] == std::vector<std::string>{"1000", "2000", "4000"});
  CHECK(v["seed"] == std::vector<std::string>{"1", "2"});
  CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("colour = red\n"), ConfigError);
}

TEST_CASE("experiment spec validation and per-run failures") {
  ExperimentSpec spec;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.budgets = {20};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.seeds = {1};
  CHECK_NOTHROW(spec.validate());

  auto ds = testing::synthetic_dataset(4, 2, 10, 1);
  spec.out_dir = testing::temp_dir("experiment");
  spec.budgets = {20, 1000};  // 1000 exceeds the 40-image training set
  spec.base.arch = Arch::ConvNet13;
  spec.base.width_scale = 0.0625;
  spec.base.batch = 8;
  spec.base.epochs = 1;
  spec.base.proxy_classes = 6;
  auto out = run_experiment(spec, ds, nullptr);
  REQUIRE(out.size() == 2);
  CHECK(out[0].record.has_value());
  CHECK(out[0].exit_code == 0);
  CHECK(out[0].record->steps == 5);
  CHECK_FALSE(out[1].record.has_value());
  CHECK(out[1].exit_code == 1);
  CHECK(read_records(spec.out_dir).size() == 1);
}
