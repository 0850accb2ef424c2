#include <array>
#include <cstring>
#include <fstream>

#include "cs4l/data.hpp"

namespace cs4l {
namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic{'C', 'D', 'S', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4 + 1;

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void write_u32le(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

}  // namespace

Container load_container(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open container " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) throw DataError("container too short: " + file.string());
  if (std::memcmp(bytes.data(), kMagic.data(), 3) == 0 && bytes[3] != static_cast<std::uint8_t>(kMagic[3]))
    throw DataError("unsupported container version '" + std::string(1, static_cast<char>(bytes[3])) +
                    "' in " + file.string());
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw DataError("bad magic in " + file.string() + " (expected CDS1)");

  const std::uint8_t* p = bytes.data() + 4;
  std::uint64_t n = read_u32le(p), h = read_u32le(p + 4), w = read_u32le(p + 8), c = read_u32le(p + 12);
  std::uint8_t has_labels = p[16];
  if (has_labels > 1) throw DataError("bad label flag in " + file.string());
  if (n > 0 && (h == 0 || w == 0 || c == 0)) throw DataError("zero image dimension in " + file.string());
  std::uint64_t image_bytes = h * w * c;
  std::uint64_t expected = kHeaderBytes + (has_labels ? n : 0) + n * image_bytes;
  if (bytes.size() != expected)
    throw DataError("size mismatch in " + file.string() + ": " + std::to_string(bytes.size()) +
                    " bytes, header implies " + std::to_string(expected));

  Container out;
  out.height = static_cast<int>(h);
  out.width = static_cast<int>(w);
  out.channels = static_cast<int>(c);
  const std::uint8_t* cursor = bytes.data() + kHeaderBytes;
  if (has_labels) {
    out.labels.emplace(cursor, cursor + n);
    cursor += n;
  }
  out.images.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i, cursor += image_bytes)
    out.images.emplace_back(out.height, out.width, out.channels,
                            std::vector<std::uint8_t>(cursor, cursor + image_bytes));
  return out;
}

void write_container(const fs::path& file, const Container& container) {
  for (const auto& img : container.images)
    if (img.height() != container.height || img.width() != container.width ||
        img.channels() != container.channels)
      throw ContractError("container images must share one shape");
  if (container.labels && container.labels->size() != container.images.size())
    throw ContractError("container label count differs from image count");

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write container " + file.string());
  out.write(kMagic.data(), 4);
  write_u32le(out, static_cast<std::uint32_t>(container.images.size()));
  write_u32le(out, static_cast<std::uint32_t>(container.height));
  write_u32le(out, static_cast<std::uint32_t>(container.width));
  write_u32le(out, static_cast<std::uint32_t>(container.channels));
  out.put(container.labels ? 1 : 0);
  if (container.labels)
    out.write(reinterpret_cast<const char*>(container.labels->data()),
              static_cast<std::streamsize>(container.labels->size()));
  for (const auto& img : container.images)
    out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.size()));
  if (!out) throw DataError("write failed: " + file.string());
}

Container to_container(std::span<const LabeledExample> examples) {
  Container c;
  if (!examples.empty()) {
    c.height = examples.front().image.height();
    c.width = examples.front().image.width();
    c.channels = examples.front().image.channels();
  }
  c.labels.emplace();
  for (const auto& ex : examples) {
    c.images.push_back(ex.image);
    c.labels->push_back(static_cast<std::uint8_t>(ex.label));
  }
  return c;
}

std::vector<LabeledExample> to_examples(const Container& container, int num_classes) {
  if (!container.labels) throw DataError("container has no labels");
  std::vector<LabeledExample> out;
  out.reserve(container.images.size());
  for (std::size_t i = 0; i < container.images.size(); ++i) {
    int y = (*container.labels)[i];
    if (y >= num_classes)
      throw DataError("corrupt record " + std::to_string(i) + ": label " + std::to_string(y) +
                      " >= " + std::to_string(num_classes));
    out.push_back({container.images[i], y});
  }
  return out;
}

}  // namespace cs4l
