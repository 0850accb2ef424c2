#include "cs4l/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace cs4l {
namespace fs = std::filesystem;

DatasetKind parse_dataset(std::string_view name) {
  if (name == "cifar10") return DatasetKind::Cifar10;
  if (name == "cifar100") return DatasetKind::Cifar100;
  if (name == "svhn") return DatasetKind::Svhn;
  throw ConfigError("unknown dataset '" + std::string(name) + "' (expected cifar10, cifar100 or svhn)");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Cifar10: return "cifar10";
    case DatasetKind::Cifar100: return "cifar100";
    case DatasetKind::Svhn: return "svhn";
  }
  return "?";
}

int num_classes(DatasetKind kind) { return kind == DatasetKind::Cifar100 ? 100 : 10; }

namespace {

std::vector<std::uint8_t> read_all(const fs::path& file, std::size_t record_bytes) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec))
    throw DataError("missing file " + file.string() + " (expected a multiple of " +
                    std::to_string(record_bytes) + " bytes, 10000 records = " +
                    std::to_string(10000 * record_bytes) + " bytes)");
  auto size = fs::file_size(file);
  if (size == 0 || size % record_bytes != 0)
    throw DataError("truncated file " + file.string() + ": " + std::to_string(size) +
                    " bytes, expected a multiple of " + std::to_string(record_bytes) +
                    " (10000 records = " + std::to_string(10000 * record_bytes) + " bytes)");
  std::vector<std::uint8_t> bytes(size);
  std::ifstream in(file, std::ios::binary);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw DataError("read failed: " + file.string());
  return bytes;
}

// Channel-planar (R plane, G plane, B plane) to interleaved HWC.
ImageU8 planar_to_image(const std::uint8_t* planes) {
  ImageU8 image(32, 32, 3);
  auto px = image.pixels();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 1024; ++i) px[static_cast<std::size_t>(i) * 3 + c] = planes[c * 1024 + i];
  return image;
}

std::vector<LabeledExample> read_cifar(const fs::path& file, std::size_t label_bytes, int classes) {
  const std::size_t record = label_bytes + kCifarPixelBytes;
  auto bytes = read_all(file, record);
  std::size_t n = bytes.size() / record;
  std::vector<LabeledExample> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes.data() + r * record;
    int label = rec[label_bytes - 1];
    if (label >= classes)
      throw DataError("corrupt record " + std::to_string(r) + " in " + file.string() + ": label " +
                      std::to_string(label) + " >= " + std::to_string(classes));
    out.push_back({planar_to_image(rec + label_bytes), label});
  }
  return out;
}

void append(std::vector<LabeledExample>& dst, std::vector<LabeledExample> src) {
  dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

}  // namespace

std::vector<LabeledExample> read_cifar10_file(const fs::path& file) { return read_cifar(file, 1, 10); }
std::vector<LabeledExample> read_cifar100_file(const fs::path& file) { return read_cifar(file, 2, 100); }

Dataset load_cifar10(const fs::path& dir) {
  Dataset ds{DatasetKind::Cifar10, 10, {}, {}};
  for (int i = 1; i <= 5; ++i)
    append(ds.train, read_cifar10_file(dir / ("data_batch_" + std::to_string(i) + ".bin")));
  ds.test = read_cifar10_file(dir / "test_batch.bin");
  return ds;
}

Dataset load_cifar100(const fs::path& dir) {
  Dataset ds{DatasetKind::Cifar100, 100, {}, {}};
  ds.train = read_cifar100_file(dir / "train.bin");
  ds.test = read_cifar100_file(dir / "test.bin");
  return ds;
}

Dataset load_svhn(const fs::path& dir) {
  Dataset ds{DatasetKind::Svhn, 10, {}, {}};
  ds.train = to_examples(load_container(dir / "svhn_train.cds"), 10);
  ds.test = to_examples(load_container(dir / "svhn_test.cds"), 10);
  return ds;
}

Dataset load_dataset(DatasetKind kind, const fs::path& dir) {
  switch (kind) {
    case DatasetKind::Cifar10: return load_cifar10(dir);
    case DatasetKind::Cifar100: return load_cifar100(dir);
    case DatasetKind::Svhn: return load_svhn(dir);
  }
  throw ConfigError("unknown dataset kind");
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with an explicit draw so the order is identical across
  // standard library implementations.
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

DatasetSplit make_split(const Dataset& dataset, std::size_t budget, std::uint64_t seed) {
  const auto& train = dataset.train;
  if (budget > train.size())
    throw ConfigError("label budget " + std::to_string(budget) + " exceeds training set size " +
                      std::to_string(train.size()));
  const int k = dataset.num_classes;

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < train.size(); ++i) {
    int y = train[i].label;
    if (y < 0 || y >= k) throw DataError("label " + std::to_string(y) + " out of range");
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }

  // Water-fill: the largest level L with sum_c min(avail_c, L) <= budget,
  // leftovers go one each to randomly chosen classes that still have examples.
  std::size_t level = 0;
  auto filled = [&](std::size_t l) {
    std::size_t s = 0;
    for (auto& c : by_class) s += std::min(c.size(), l);
    return s;
  };
  std::size_t hi = train.size();
  while (level < hi) {
    std::size_t mid = (level + hi + 1) / 2;
    if (filled(mid) <= budget) level = mid; else hi = mid - 1;
  }

  Rng rng = make_rng(seed, Stream::Split);
  std::vector<std::size_t> quota(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < quota.size(); ++c) quota[c] = std::min(by_class[c].size(), level);
  std::size_t leftover = budget - filled(level);
  std::vector<std::size_t> open;
  for (std::size_t c = 0; c < quota.size(); ++c)
    if (by_class[c].size() > level) open.push_back(c);
  auto class_order = permutation(open.size(), rng);
  for (std::size_t i = 0; i < leftover; ++i) ++quota[open[class_order[i]]];

  DatasetSplit split;
  split.num_classes = k;
  split.seed = seed;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto order = permutation(by_class[c].size(), rng);
    for (std::size_t i = 0; i < quota[c]; ++i) split.labeled_indices.push_back(by_class[c][order[i]]);
  }
  std::sort(split.labeled_indices.begin(), split.labeled_indices.end());
  split.labeled.reserve(budget);
  for (auto i : split.labeled_indices) split.labeled.push_back(train[i]);
  split.unlabeled.reserve(train.size());
  for (const auto& ex : train) split.unlabeled.push_back(ex.image);
  split.test = dataset.test;
  return split;
}

LabeledCycler::LabeledCycler(std::size_t labeled_count, std::size_t batch, std::uint64_t seed)
    : count_(labeled_count), batch_(batch), seed_(seed) {
  if (batch_ == 0) throw ConfigError("batch size must be at least 1");
  if (count_ == 0) throw ConfigError("labeled set is empty");
}

LabeledCycler::LabeledCycler(const DatasetSplit& split, std::size_t batch, std::uint64_t seed)
    : LabeledCycler(split.labeled.size(), batch, seed) {
  split_ = &split;
}

const std::vector<std::size_t>& LabeledCycler::pass_order(std::uint64_t pass) const {
  if (pass != cached_pass_) {
    Rng rng = make_rng(seed_, Stream::LabeledOrder, pass);
    cached_order_ = permutation(count_, rng);
    cached_pass_ = pass;
  }
  return cached_order_;
}

std::vector<std::size_t> LabeledCycler::indices_at(std::uint64_t step) const {
  std::vector<std::size_t> out;
  out.reserve(batch_);
  std::uint64_t pos = step * batch_;
  for (std::size_t i = 0; i < batch_; ++i, ++pos) out.push_back(pass_order(pos / count_)[pos % count_]);
  return out;
}

LabeledBatch LabeledCycler::next() {
  if (split_ == nullptr) throw ContractError("cycler was built without a split");
  LabeledBatch batch;
  for (auto i : next_indices()) {
    batch.images.push_back(to_float(split_->labeled[i].image));
    batch.labels.push_back(split_->labeled[i].label);
  }
  return batch;
}

UnlabeledSampler::UnlabeledSampler(std::size_t count, std::size_t batch, std::uint64_t seed)
    : count_(count), batch_(batch), seed_(seed) {
  if (batch_ == 0) throw ConfigError("batch size must be at least 1");
  if (count_ == 0) throw ConfigError("unlabeled set is empty");
  steps_per_epoch_ = (count_ + batch_ - 1) / batch_;
}

const std::vector<std::size_t>& UnlabeledSampler::epoch_order(std::uint64_t epoch) const {
  if (epoch != cached_epoch_) {
    Rng rng = make_rng(seed_, Stream::UnlabeledOrder, epoch);
    cached_order_ = permutation(count_, rng);
    cached_epoch_ = epoch;
  }
  return cached_order_;
}

std::vector<std::size_t> UnlabeledSampler::indices_at(std::uint64_t step) const {
  const auto& order = epoch_order(step / steps_per_epoch_);
  std::size_t start = static_cast<std::size_t>(step % steps_per_epoch_) * batch_;
  std::vector<std::size_t> out;
  out.reserve(batch_);
  for (std::size_t i = 0; i < batch_; ++i) out.push_back(order[(start + i) % count_]);
  return out;
}

ChannelStats compute_channel_stats(std::span<const ImageU8> images) {
  if (images.empty()) throw DataError("cannot compute channel statistics of an empty set");
  const int c = images.front().channels();
  std::vector<double> sum(static_cast<std::size_t>(c)), sq(static_cast<std::size_t>(c));
  std::size_t per_channel = 0;
  for (const auto& img : images) {
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      double v = px[i] / 255.0;
      sum[i % c] += v;
      sq[i % c] += v * v;
    }
    per_channel += px.size() / c;
  }
  ChannelStats stats;
  for (int ch = 0; ch < c; ++ch) {
    double m = sum[ch] / per_channel;
    double var = std::max(0.0, sq[ch] / per_channel - m * m);
    stats.mean.push_back(static_cast<float>(m));
    stats.stddev.push_back(static_cast<float>(std::max(std::sqrt(var), 1e-6)));
  }
  return stats;
}

Image normalize(const Image& image, const ChannelStats& stats) {
  const int c = image.channels();
  if (stats.mean.size() != static_cast<std::size_t>(c))
    throw ContractError("channel statistics do not match image channels");
  Image out = image;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = (px[i] - stats.mean[i % c]) / stats.stddev[i % c];
  return out;
}

AugmentDraw draw_augment(Rng& rng, bool allow_hflip) {
  AugmentDraw d;
  d.dy = static_cast<int>(rng() % (2 * kAugmentPad + 1)) - kAugmentPad;
  d.dx = static_cast<int>(rng() % (2 * kAugmentPad + 1)) - kAugmentPad;
  d.flip = allow_hflip && (rng() & 1u);
  return d;
}

namespace {
// Reflection without repeating the edge pixel (numpy/torch "reflect").
int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}
}  // namespace

Image apply_augment(const Image& image, const AugmentDraw& draw) {
  const int h = image.height(), w = image.width(), c = image.channels();
  Image out(h, w, c);
  for (int y = 0; y < h; ++y) {
    int sy = reflect(y + draw.dy, h);
    for (int x = 0; x < w; ++x) {
      int sx = reflect(x + draw.dx, w);
      int ox = draw.flip ? w - 1 - x : x;
      for (int ch = 0; ch < c; ++ch) out.at(y, ox, ch) = image.at(sy, sx, ch);
    }
  }
  return out;
}

Image augment_labeled(const Image& image, Rng& rng, bool allow_hflip) {
  return apply_augment(image, draw_augment(rng, allow_hflip));
}

bool allows_hflip(DatasetKind kind) { return kind != DatasetKind::Svhn; }

}  // namespace cs4l
