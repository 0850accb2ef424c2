#include <doctest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "cs4l/colorizer.hpp"
#include "cs4l/data.hpp"
#include "cs4l/experiment.hpp"
#include "synthetic.hpp"

using namespace cs4l;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

Result run_cli(const std::string& args, const fs::path& log) {
  std::string cmd = std::string("\"") + CS4L_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& fixture() {
  static const fs::path dir = [] {
    auto d = testing::temp_dir("cli_fixture");
    testing::write_fake_cifar10(d / "cifar10", 10, 21);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("cli: convert round trip") {
  auto out = testing::temp_dir("cli_convert");
  auto r = run_cli("convert --dataset cifar10 --data-dir \"" + (fixture() / "cifar10").string() + "\" --out \"" +
                       out.string() + "\"",
                   out / "log");
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  auto direct = load_cifar10(fixture() / "cifar10");
  auto train = load_container(out / "cifar10_train.cds");
  auto test = load_container(out / "cifar10_test.cds");
  CHECK(train.images.size() == 50);
  auto examples = to_examples(train, 10);
  REQUIRE(examples.size() == direct.train.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    CHECK(examples[i].label == direct.train[i].label);
    CHECK(examples[i].image == direct.train[i].image);
  }
  CHECK(to_examples(test, 10).size() == direct.test.size());
}

TEST_CASE("cli: corrupt source fails with a diagnostic") {
  auto dir = testing::temp_dir("cli_corrupt");
  testing::write_fake_cifar10(dir, 4, 1);
  fs::resize_file(dir / "data_batch_3.bin", 3073 * 4 - 17);
  auto r = run_cli("convert --dataset cifar10 --data-dir \"" + dir.string() + "\"", dir / "log");
  CHECK(r.code == 2);
  CHECK(r.output.find("data_batch_3.bin") != std::string::npos);

  auto missing = run_cli("convert --dataset cifar10 --data-dir \"" + (dir / "nope").string() + "\"", dir / "log2");
  CHECK(missing.code == 2);
  CHECK(run_cli("convert --dataset imagenet --data-dir x", dir / "log3").code == 1);
}

TEST_CASE("cli: colorizer pretraining, runs and report") {
  auto out = testing::temp_dir("cli_pipeline");
  const std::string data = "--dataset cifar10 --data-dir \"" + (fixture() / "cifar10").string() + "\"";

  auto p1 = run_cli("pretrain-colorizer " + data + " --epochs 1 --batch 16 --seed 3 --out \"" + (out / "a").string() + "\"",
                    out / "p1");
  CAPTURE(p1.output);
  REQUIRE(p1.code == 0);
  CHECK(p1.output.find("epoch 1 loss") != std::string::npos);
  auto ckpt = out / "a" / "cifar10-1-color";
  REQUIRE(fs::exists(ckpt));
  auto loaded = load_colorizer(ckpt);
  CHECK(loaded.epochs == 1);
  CHECK(loaded.dataset == "cifar10");

  auto p2 = run_cli("pretrain-colorizer " + data + " --epochs 1 --batch 16 --seed 3 --out \"" + (out / "b").string() + "\"",
                    out / "p2");
  REQUIRE(p2.code == 0);
  CHECK(slurp(ckpt) == slurp(out / "b" / "cifar10-1-color"));

  const std::string common = data + " --arch convnet13 --width-scale 0.0625 --budget 20 --seed 1 --seed 2 --epochs 1 "
                             "--batch 8 --out \"" + (out / "res").string() + "\"";
  auto ssl = run_cli("run " + common + " --omega 1 --colorizer \"" + ckpt.string() + "\"", out / "r1");
  CAPTURE(ssl.output);
  REQUIRE(ssl.code == 0);
  CHECK(ssl.output.find("test error") != std::string::npos);
  auto sup = run_cli("run " + common + " --omega 0", out / "r2");
  REQUIRE(sup.code == 0);

  // Without --colorizer the dataset's default artifact is taken from the data directory.
  fs::copy(fixture() / "cifar10", out / "data");
  fs::copy_file(ckpt, out / "data" / "cifar10-300-color");
  auto dflt = run_cli("run --dataset cifar10 --data-dir \"" + (out / "data").string() +
                          "\" --arch convnet13 --width-scale 0.0625 --budget 10 --seed 1 --epochs 1 --batch 25 --omega 1 "
                          "--out \"" + (out / "dflt").string() + "\"",
                      out / "r_default");
  CAPTURE(dflt.output);
  CHECK(dflt.code == 0);

  auto records = read_records(out / "res");
  CHECK(records.size() == 4);
  int supervised = 0;
  for (const auto& r : records) {
    supervised += r.method == "supervised";
    CHECK(r.steps == 7);  // ceil(50 / 8)
  }
  CHECK(supervised == 2);

  auto rep = run_cli("report --out \"" + (out / "res").string() + "\" --budget 20 --budget 4000", out / "r3");
  CAPTURE(rep.output);
  REQUIRE(rep.code == 0);
  auto text = slurp(out / "res" / "report" / "cifar10.txt");
  CHECK(text.find("colors4l(convnet13)") != std::string::npos);
  CHECK(text.find("supervised(convnet13)") != std::string::npos);
  CHECK(text.find("20L") != std::string::npos);
  CHECK(text.find("* 4000L omitted: no records") != std::string::npos);
  auto cells = parse_csv(slurp(out / "res" / "report" / "cifar10.csv"));
  CHECK(cells.size() == 2);
  for (const auto& c : cells) CHECK(c.runs == 2);
  CHECK(fs::exists(out / "res" / "report" / "plots" / "cifar10_colors4l_convnet13_20L_seed1.svg"));
}

TEST_CASE("cli: usage and configuration errors") {
  auto out = testing::temp_dir("cli_usage");
  const std::string data = "--dataset cifar10 --data-dir \"" + (fixture() / "cifar10").string() + "\"";
  CHECK(run_cli("", out / "l0").code == 1);
  CHECK(run_cli("run " + data + " --budget 20 --omega 0", out / "l1").code == 1);  // no seed
  CHECK(run_cli("run " + data + " --seed 1 --omega 0", out / "l2").code == 1);     // no budget
  CHECK(run_cli("run " + data + " --budget 20 --seed 1 --omega 1", out / "l3").code == 1);  // no colorizer
  CHECK(run_cli("run " + data + " --budget 5000 --seed 1 --omega 0", out / "l4").code == 1);
  CHECK(run_cli("run " + data + " --budget 20 --seed 1 --omega 0 --arch resnet", out / "l5").code == 1);
  CHECK(run_cli("report --out \"" + (out / "empty").string() + "\"", out / "l6").code == 2);

  std::ofstream(out / "bad.cfg") << "budget = 20\nseed = 1\nlearning_rate = 3\n";
  auto r = run_cli("run " + data + " --omega 0 --config \"" + (out / "bad.cfg").string() + "\"", out / "l7");
  CHECK(r.code == 1);
  CHECK(r.output.find("learning_rate") != std::string::npos);
}

TEST_CASE("cli: config file supplies budgets and seeds") {
  auto out = testing::temp_dir("cli_config");
  std::ofstream(out / "run.cfg") << "# tiny run\nbudget = 10\nseed = 4\nomega = 0\nepochs = 1\nbatch = 10\n"
                                    "arch = convnet13\nwidth_scale = 0.0625\nout = " + (out / "res").string() + "\n";
  auto r = run_cli("run --dataset cifar10 --data-dir \"" + (fixture() / "cifar10").string() + "\" --config \"" +
                       (out / "run.cfg").string() + "\"",
                   out / "log");
  CAPTURE(r.output);
  REQUIRE(r.code == 0);
  auto recs = read_records(out / "res");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].budget == 10);
  CHECK(recs[0].seed == 4);
  CHECK(recs[0].method == "supervised");
}
