#include "cs4l/colorizer.hpp"

#include <json.hpp>

#include "cs4l/data.hpp"
#include "cs4l/errors.hpp"
#include "cs4l/pretext.hpp"
#include "cs4l/rng.hpp"
#include "cs4l/tensor_io.hpp"

namespace cs4l {

namespace {

constexpr double kOutputMargin = 1e-6;

torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

torch::Tensor up2(const torch::Tensor& x) {
  return torch::nn::functional::interpolate(
      x, torch::nn::functional::InterpolateFuncOptions()
             .scale_factor(std::vector<double>{2.0, 2.0})
             .mode(torch::kNearest));
}

}  // namespace

ColorizerNetImpl::ColorizerNetImpl() {
  enc1 = register_module("enc1", conv(1, 32, 3, 2));
  enc2 = register_module("enc2", conv(32, 64, 3, 2));
  enc3 = register_module("enc3", conv(64, 128, 3, 2));
  dec1 = register_module("dec1", conv(128, 64, 3));
  dec2 = register_module("dec2", conv(64, 32, 3));
  dec3 = register_module("dec3", conv(32, 32, 3));
  to_rgb = register_module("to_rgb", conv(32, 3, 1));
}

torch::Tensor ColorizerNetImpl::forward(torch::Tensor gray) {
  auto x = torch::relu(enc1(gray));
  x = torch::relu(enc2(x));
  x = torch::relu(enc3(x));
  x = torch::relu(dec1(up2(x)));
  x = torch::relu(dec2(up2(x)));
  x = torch::relu(dec3(up2(x)));
  // Squeezed sigmoid keeps f32 outputs strictly inside (0,1).
  return kOutputMargin + (1.0 - 2.0 * kOutputMargin) * torch::sigmoid(to_rgb(x));
}

ColorizerParams ColorizerParams::init(std::uint64_t seed) {
  torch::manual_seed(derive_seed(seed, Stream::Init));
  return ColorizerParams{ColorizerNet(), "", 0, {}};
}

torch::Tensor colorizer_forward(const ColorizerParams& params, const torch::Tensor& gray) {
  if (gray.dim() != 4 || gray.size(1) != 1)
    throw ContractError("colorizer expects B x 1 x H x W input");
  if (gray.size(2) % 8 != 0 || gray.size(3) % 8 != 0)
    throw ContractError("colorizer spatial dims must be multiples of 8");
  return params.net.ptr()->forward(gray);
}

Image colorize(const ColorizerParams& params, const Image& gray) {
  if (gray.channels() != 1) throw ContractError("colorize expects a single-channel image");
  torch::NoGradGuard no_grad;
  std::vector<Image> one{gray};
  return tensor_to_images(colorizer_forward(params, images_to_tensor(one))).front();
}

torch::Tensor colorizer_loss(const torch::Tensor& pred, const torch::Tensor& target) {
  if (pred.sizes() != target.sizes()) throw ContractError("colorizer_loss shape mismatch");
  return (pred - target).pow(2).mean();
}

torch::Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ContractError("empty image batch");
  const auto h = images.front().height(), w = images.front().width(), c = images.front().channels();
  auto out = torch::empty({static_cast<std::int64_t>(images.size()), c, h, w});
  auto acc = out.accessor<float, 4>();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.height() != h || img.width() != w || img.channels() != c)
      throw ContractError("image batch shapes differ");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) acc[static_cast<std::int64_t>(n)][ch][y][x] = img.at(y, x, ch);
  }
  return out;
}

std::vector<Image> tensor_to_images(const torch::Tensor& nchw) {
  auto t = nchw.detach().to(torch::kFloat32).contiguous();
  auto acc = t.accessor<float, 4>();
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(t.size(0)));
  for (std::int64_t n = 0; n < t.size(0); ++n) {
    Image img(static_cast<int>(t.size(2)), static_cast<int>(t.size(3)), static_cast<int>(t.size(1)));
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int ch = 0; ch < img.channels(); ++ch) img.at(y, x, ch) = acc[n][ch][y][x];
    out.push_back(std::move(img));
  }
  return out;
}

namespace {

struct ColorPairs {
  torch::Tensor gray;  // N x 1 x H x W
  torch::Tensor rgb;   // N x 3 x H x W
};

ColorPairs make_pairs(std::span<const Image> images) {
  std::vector<Image> gray;
  gray.reserve(images.size());
  for (const auto& img : images) gray.push_back(grayscale(img));
  return {images_to_tensor(gray), images_to_tensor(images)};
}

}  // namespace

void train_colorizer(ColorizerParams& params, std::span<const Image> images, const ColorizerConfig& config,
                     const ColorizerEpochObserver& observer) {
  if (images.empty()) throw DataError("colorizer training set is empty");
  if (config.epochs < 1 || config.batch < 1) throw ConfigError("colorizer epochs and batch must be positive");
  auto pairs = make_pairs(images);
  const auto n = pairs.gray.size(0);

  auto& net = *params.net.ptr();
  net.train();
  torch::optim::Adam adam(net.parameters(), torch::optim::AdamOptions(config.learning_rate));
  const int first_epoch = params.epochs;
  for (int e = 0; e < config.epochs; ++e) {
    Rng rng = make_rng(config.seed, Stream::Colorizer, static_cast<std::uint64_t>(first_epoch + e));
    auto order = permutation(static_cast<std::size_t>(n), rng);
    auto idx_all = torch::tensor(std::vector<std::int64_t>(order.begin(), order.end()), torch::kInt64);
    double total = 0.0;
    for (std::int64_t start = 0; start < n; start += config.batch) {
      auto idx = idx_all.slice(0, start, std::min<std::int64_t>(n, start + config.batch));
      auto pred = net.forward(pairs.gray.index_select(0, idx));
      auto loss = colorizer_loss(pred, pairs.rgb.index_select(0, idx));
      adam.zero_grad();
      loss.backward();
      adam.step();
      total += loss.item<double>() * static_cast<double>(idx.size(0));
    }
    double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean)) throw NumericError("colorizer loss became non-finite at epoch " + std::to_string(e + 1));
    params.epoch_losses.push_back(mean);
    params.epochs += 1;
    if (observer) observer(params.epochs, mean, params);
  }
  net.eval();
}

ColorizerParams train_colorizer(std::span<const Image> images, const ColorizerConfig& config,
                                const std::string& dataset_name, const ColorizerEpochObserver& observer) {
  auto params = ColorizerParams::init(config.seed);
  params.dataset = dataset_name;
  train_colorizer(params, images, config, observer);
  return params;
}

double colorizer_mse(const ColorizerParams& params, std::span<const Image> images, int batch) {
  if (images.empty()) throw DataError("no images to evaluate");
  torch::NoGradGuard no_grad;
  auto pairs = make_pairs(images);
  const auto n = pairs.gray.size(0);
  double total = 0.0;
  for (std::int64_t start = 0; start < n; start += batch) {
    auto end = std::min<std::int64_t>(n, start + batch);
    auto pred = colorizer_forward(params, pairs.gray.slice(0, start, end));
    total += colorizer_loss(pred, pairs.rgb.slice(0, start, end)).item<double>() * static_cast<double>(end - start);
  }
  return total / static_cast<double>(n);
}

void save_colorizer(const ColorizerParams& params, const std::filesystem::path& file) {
  nlohmann::json meta = {{"kind", "colorizer"},
                         {"dataset", params.dataset},
                         {"epochs", params.epochs},
                         {"epoch_losses", params.epoch_losses}};
  TensorArchive archive;
  archive.config = meta.dump();
  for (const auto& p : params.net->named_parameters()) archive.tensors.push_back({p.key(), p.value()});
  write_archive(file, archive);
}

ColorizerParams load_colorizer(const std::filesystem::path& file) {
  auto archive = read_archive(file);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(archive.config);
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt colorizer " + file.string() + ": unreadable metadata");
  }
  if (meta.value("kind", "") != "colorizer")
    throw DataError(file.string() + " is not a colorizer checkpoint");
  ColorizerParams params{ColorizerNet(), meta.value("dataset", ""), meta.value("epochs", 0),
                         meta.value("epoch_losses", std::vector<double>{})};
  torch::NoGradGuard no_grad;
  auto named = params.net->named_parameters();
  if (named.size() != archive.tensors.size())
    throw DataError("colorizer " + file.string() + " has " + std::to_string(archive.tensors.size()) +
                    " tensors, expected " + std::to_string(named.size()));
  for (auto& p : named) {
    const auto* t = archive.find(p.key());
    if (t == nullptr || t->sizes() != p.value().sizes() || t->scalar_type() != p.value().scalar_type())
      throw DataError("colorizer " + file.string() + ": tensor '" + p.key() + "' missing or mis-shaped");
    if (!torch::isfinite(*t).all().item<bool>())
      throw DataError("colorizer " + file.string() + ": tensor '" + p.key() + "' is not finite");
    p.value().copy_(*t);
  }
  params.net->eval();
  return params;
}

std::string colorizer_artifact_name(const std::string& dataset, int epochs) {
  return dataset + "-" + std::to_string(epochs) + "-color";
}

}  // namespace cs4l
