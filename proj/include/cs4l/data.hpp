#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cs4l/image.hpp"
#include "cs4l/rng.hpp"

namespace cs4l {

enum class DatasetKind { Cifar10, Cifar100, Svhn };

DatasetKind parse_dataset(std::string_view name);
std::string_view to_string(DatasetKind kind);
int num_classes(DatasetKind kind);

struct LabeledExample {
  ImageU8 image;
  int label = 0;

  bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
  DatasetKind kind = DatasetKind::Cifar10;
  int num_classes = 10;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

// CIFAR binary batches: 1 label byte (CIFAR-100: coarse + fine) followed by
// 3072 channel-planar pixel bytes. Files must hold a whole number of records.
inline constexpr std::size_t kCifarPixelBytes = 3072;
inline constexpr std::size_t kCifar10RecordBytes = 1 + kCifarPixelBytes;
inline constexpr std::size_t kCifar100RecordBytes = 2 + kCifarPixelBytes;

std::vector<LabeledExample> read_cifar10_file(const std::filesystem::path& file);
std::vector<LabeledExample> read_cifar100_file(const std::filesystem::path& file);

// Expects data_batch_{1..5}.bin and test_batch.bin.
Dataset load_cifar10(const std::filesystem::path& dir);
// Expects train.bin and test.bin; the fine label is used.
Dataset load_cifar100(const std::filesystem::path& dir);
// Expects the converted containers svhn_train.cds and svhn_test.cds.
Dataset load_svhn(const std::filesystem::path& dir);
Dataset load_dataset(DatasetKind kind, const std::filesystem::path& dir);

// Portable "CDS1" container.
struct Container {
  int height = 32;
  int width = 32;
  int channels = 3;
  std::vector<ImageU8> images;
  std::optional<std::vector<std::uint8_t>> labels;
};

Container load_container(const std::filesystem::path& file);
void write_container(const std::filesystem::path& file, const Container& container);
Container to_container(std::span<const LabeledExample> examples);
std::vector<LabeledExample> to_examples(const Container& container, int num_classes);

struct DatasetSplit {
  std::vector<LabeledExample> labeled;  // D_L
  std::vector<ImageU8> unlabeled;       // D_U, every training image
  std::vector<LabeledExample> test;
  int num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> labeled_indices;  // positions of D_L in the train list
};

// Class-balanced uniform draw of `budget` labeled examples. Per-class counts
// differ by at most one unless a class runs out of examples.
DatasetSplit make_split(const Dataset& dataset, std::size_t budget, std::uint64_t seed);

struct LabeledBatch {
  std::vector<Image> images;
  std::vector<int> labels;
};

// Endless stream over D_L: successive reshuffled passes concatenated, cut into
// batches of exactly B. Batch contents depend only on (seed, step).
class LabeledCycler {
 public:
  LabeledCycler(std::size_t labeled_count, std::size_t batch, std::uint64_t seed);
  LabeledCycler(const DatasetSplit& split, std::size_t batch, std::uint64_t seed);

  std::vector<std::size_t> indices_at(std::uint64_t step) const;
  std::vector<std::size_t> next_indices() { return indices_at(step_++); }
  LabeledBatch next();

  std::uint64_t step() const { return step_; }
  void seek(std::uint64_t step) { step_ = step; }
  std::size_t batch() const { return batch_; }

 private:
  const std::vector<std::size_t>& pass_order(std::uint64_t pass) const;

  const DatasetSplit* split_ = nullptr;
  std::size_t count_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  mutable std::uint64_t cached_pass_ = ~std::uint64_t{0};
  mutable std::vector<std::size_t> cached_order_;
};

// Epoch-shuffled draws over D_U without replacement inside an epoch. The last
// batch of an epoch is topped up from the head of that epoch's order so every
// batch holds exactly B images.
class UnlabeledSampler {
 public:
  UnlabeledSampler(std::size_t count, std::size_t batch, std::uint64_t seed);

  std::uint64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::vector<std::size_t> indices_at(std::uint64_t step) const;

 private:
  const std::vector<std::size_t>& epoch_order(std::uint64_t epoch) const;

  std::size_t count_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::uint64_t steps_per_epoch_;
  mutable std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  mutable std::vector<std::size_t> cached_order_;
};

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stddev;
};

// Per-channel mean and population standard deviation over [0,1] pixel values.
ChannelStats compute_channel_stats(std::span<const ImageU8> images);
Image normalize(const Image& image, const ChannelStats& stats);

// Crop offset relative to the centered 32x32 window of the 4-pixel padded image.
struct AugmentDraw {
  int dy = 0;
  int dx = 0;
  bool flip = false;
};

inline constexpr int kAugmentPad = 4;

AugmentDraw draw_augment(Rng& rng, bool allow_hflip);
// Reflect-pad by 4, crop at the drawn offset, optionally mirror left-right.
Image apply_augment(const Image& image, const AugmentDraw& draw);
Image augment_labeled(const Image& image, Rng& rng, bool allow_hflip);
// Digits change identity when mirrored, so only CIFAR gets flips.
bool allows_hflip(DatasetKind kind);

}  // namespace cs4l
