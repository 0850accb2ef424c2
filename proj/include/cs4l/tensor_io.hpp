#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace cs4l {

// Versioned binary container shared by colorizer and training checkpoints:
//   "CSL1", u32 version, u32-length-prefixed UTF-8 config snapshot,
//   u32 tensor count, then per tensor: u32-length-prefixed name, u8 dtype,
//   u8 rank, rank x u32 dims, raw little-endian payload.
inline constexpr std::uint32_t kArchiveVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I64 = 2 };

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

struct TensorArchive {
  std::string config;  // JSON snapshot
  std::vector<NamedTensor> tensors;

  const torch::Tensor* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& file, const TensorArchive& archive);
std::vector<std::uint8_t> encode_archive(const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& file);
TensorArchive decode_archive(const std::vector<std::uint8_t>& bytes, const std::string& origin);

}  // namespace cs4l
