// Acceptance criteria that need the real CIFAR-10 binaries. The data
// directory comes from $COLORS4L_DATA; without it every criterion is reported
// as SKIP and the process exits with 77 (ctest's skip code).
//
// $COLORS4L_COLORIZER may point at a pretrained colorizer for criterion 7;
// otherwise the one trained for criterion 6 is used.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <thread>

#include "cs4l/trainer.hpp"

using namespace cs4l;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kSkip = 77;

void report(const char* status, int id, const std::string& name, const std::string& detail, double secs) {
  std::printf("[%s] criterion %d: %s -- %s (%.1fs)\n", status, id, name.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

int main() {
  torch::set_num_threads(std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
  const char* env = std::getenv("COLORS4L_DATA");
  std::optional<Dataset> cifar;
  std::string why;
  if (env == nullptr) {
    why = "COLORS4L_DATA is not set";
  } else {
    try {
      cifar = load_cifar10(fs::path(env));
    } catch (const std::exception& e) {
      why = e.what();
    }
  }
  if (!cifar) {
    report("SKIP", 6, "colorizer learning", "CIFAR-10 unavailable: " + why, 0);
    report("SKIP", 7, "desk-scale SSL benefit", "CIFAR-10 unavailable: " + why, 0);
    return kSkip;
  }

  int failures = 0;

  // 6: 5000 training images, 5 epochs, held-out MSE measured after each epoch.
  auto t0 = Clock::now();
  std::vector<Image> train, held_out;
  for (std::size_t i = 0; i < 5000; ++i) train.push_back(to_float(cifar->train[i].image));
  for (std::size_t i = 0; i < 1000; ++i) held_out.push_back(to_float(cifar->test[i].image));
  std::vector<double> held_mse;
  bool in_range = true, shape_ok = true;
  auto colorizer = train_colorizer(train, {5, 128, 1e-3, 0}, "cifar10",
                                   [&](int, double, const ColorizerParams& p) {
                                     held_mse.push_back(colorizer_mse(p, held_out));
                                     torch::NoGradGuard no_grad;
                                     auto gray = torch::rand({16, 1, 32, 32});
                                     auto out = colorizer_forward(p, gray);
                                     in_range = in_range && (out > 0).all().item<bool>() && (out < 1).all().item<bool>();
                                     auto imgs = tensor_to_images(out);
                                     shape_ok = shape_ok && imgs.size() == 16 && imgs[0].height() == 32 &&
                                                imgs[0].width() == 32 && imgs[0].channels() == 3;
                                   });
  double secs6 = seconds_since(t0);
  double reduction = 1.0 - held_mse.back() / held_mse.front();
  bool pass6 = reduction >= 0.30 && in_range && shape_ok && secs6 <= 600;
  char buf[256];
  std::snprintf(buf, sizeof buf, "held-out MSE %.5f after epoch 1, %.5f after epoch 5 (%.1f%% lower)%s%s",
                held_mse.front(), held_mse.back(), 100 * reduction, in_range ? "" : ", outputs left (0,1)",
                shape_ok ? "" : ", wrong output shape");
  report(pass6 ? "PASS" : "FAIL", 6, "colorizer learning", buf, secs6);
  failures += !pass6;

  // 7: 1000 labels, convnet13, B=128, 10 epochs, 3 seeds, omega 1 vs 0.
  t0 = Clock::now();
  if (const char* path = std::getenv("COLORS4L_COLORIZER")) colorizer = load_colorizer(path);
  double ssl = 0, sup = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto split = make_split(*cifar, 1000, seed);
    TrainConfig cfg;
    cfg.arch = Arch::ConvNet13;
    cfg.batch = 128;
    cfg.epochs = 10;
    cfg.seed = seed;
    cfg.omega = 1.0;
    Trainer a(split, cfg, &colorizer);
    auto ra = continue_training(a);
    ssl += evaluate(ra.model, split.test, ra.stats) / 3;

    cfg.omega = 0.0;
    cfg.self_supervised = false;
    Trainer b(split, cfg, nullptr);
    auto rb = continue_training(b);
    sup += evaluate(rb.model, split.test, rb.stats) / 3;
  }
  bool pass7 = (sup - ssl) * 100 >= 2.0;
  std::snprintf(buf, sizeof buf, "mean test error %.2f%% with self-supervision vs %.2f%% supervised", 100 * ssl, 100 * sup);
  report(pass7 ? "PASS" : "FAIL", 7, "desk-scale SSL benefit", buf, seconds_since(t0));
  failures += !pass7;
  return failures == 0 ? 0 : 1;
}
