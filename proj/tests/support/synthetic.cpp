#include "synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <unistd.h>

namespace cs4l::testing {
namespace fs = std::filesystem;

ImageU8 random_image_u8(Rng& rng, int h, int w, int c) {
  ImageU8 img(h, w, c);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

Image random_image_f32(Rng& rng, int h, int w, int c) {
  Image img(h, w, c);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : img.pixels()) v = u(rng);
  return img;
}

ImageU8 synthetic_image(int label, int num_classes, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.06);
  const double theta = std::numbers::pi * label / num_classes;
  const double freq = 2.0 + (label % 3);
  const double phase = 2.0 * std::numbers::pi * u(rng);
  const double tint[3] = {0.5 + 0.4 * std::cos(label * 2.1), 0.5 + 0.4 * std::cos(label * 2.1 + 2.0),
                          0.5 + 0.4 * std::cos(label * 2.1 + 4.0)};
  ImageU8 img(32, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      double s = std::sin(2.0 * std::numbers::pi * freq * (x * std::cos(theta) + y * std::sin(theta)) / 32.0 + phase);
      for (int c = 0; c < 3; ++c) {
        double v = tint[c] * (0.55 + 0.35 * s) + noise(rng);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  return img;
}

Dataset synthetic_dataset(std::size_t train_per_class, std::size_t test_per_class, int num_classes,
                          std::uint64_t seed, DatasetKind kind) {
  Rng rng(seed);
  Dataset ds{kind, num_classes, {}, {}};
  for (std::size_t i = 0; i < train_per_class; ++i)
    for (int k = 0; k < num_classes; ++k) ds.train.push_back({synthetic_image(k, num_classes, rng), k});
  for (std::size_t i = 0; i < test_per_class; ++i)
    for (int k = 0; k < num_classes; ++k) ds.test.push_back({synthetic_image(k, num_classes, rng), k});
  return ds;
}

namespace {
void write_records(const fs::path& file, std::size_t n, int label_bytes, int classes, Rng& rng) {
  std::ofstream out(file, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) {
    int fine = static_cast<int>(rng() % classes);
    if (label_bytes == 2) out.put(static_cast<char>(rng() % 20));
    out.put(static_cast<char>(fine));
    for (int b = 0; b < 3072; ++b) out.put(static_cast<char>(rng() & 0xff));
  }
}
}  // namespace

void write_fake_cifar10(const fs::path& dir, std::size_t per_file, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng(seed);
  for (int i = 1; i <= 5; ++i)
    write_records(dir / ("data_batch_" + std::to_string(i) + ".bin"), per_file, 1, 10, rng);
  write_records(dir / "test_batch.bin", per_file, 1, 10, rng);
}

void write_fake_cifar100(const fs::path& dir, std::size_t train, std::size_t test, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng(seed);
  write_records(dir / "train.bin", train, 2, 100, rng);
  write_records(dir / "test.bin", test, 2, 100, rng);
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cs4l_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ProbeBackboneImpl::ProbeBackboneImpl(int channels) : channels_(channels) {
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, channels, 3).padding(1)));
}

torch::Tensor ProbeBackboneImpl::forward(torch::Tensor x) { return torch::tanh(conv->forward(x)).mean({2, 3}); }

DualHeadModel probe_model(int num_classes, std::uint64_t seed, torch::Dtype dtype) {
  DualHeadModel model(std::make_shared<ProbeBackboneImpl>(4), num_classes, "probe");
  init_weights(*model, seed);
  model->to(dtype);
  return model;
}

}  // namespace cs4l::testing
