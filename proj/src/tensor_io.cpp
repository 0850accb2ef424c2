#include "cs4l/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cs4l/errors.hpp"

namespace cs4l {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "payloads are written in native little-endian order");

const torch::Tensor* TensorArchive::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.tensor;
  return nullptr;
}

namespace {

constexpr char kMagic[4] = {'C', 'S', 'L', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
  auto p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + n);
}

DType dtype_of(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return DType::F32;
    case torch::kFloat64: return DType::F64;
    case torch::kInt64: return DType::I64;
    default: throw ContractError("unsupported tensor dtype for archive");
  }
}

torch::ScalarType scalar_type(DType d) {
  switch (d) {
    case DType::F32: return torch::kFloat32;
    case DType::F64: return torch::kFloat64;
    case DType::I64: return torch::kInt64;
  }
  throw DataError("unknown dtype");
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  const std::uint8_t* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw DataError("corrupt checkpoint " + origin_ + ": truncated");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    auto p = take(4);
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  }
  std::uint8_t u8() { return *take(1); }
  std::string str() {
    auto n = u32();
    auto p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive) {
  std::vector<std::uint8_t> out;
  put_bytes(out, kMagic, 4);
  put_u32(out, kArchiveVersion);
  put_u32(out, static_cast<std::uint32_t>(archive.config.size()));
  put_bytes(out, archive.config.data(), archive.config.size());
  put_u32(out, static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& [name, tensor] : archive.tensors) {
    auto t = tensor.detach().contiguous().cpu();
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    out.push_back(static_cast<std::uint8_t>(dtype_of(t)));
    out.push_back(static_cast<std::uint8_t>(t.dim()));
    for (auto d : t.sizes()) put_u32(out, static_cast<std::uint32_t>(d));
    put_bytes(out, t.data_ptr(), t.numel() * t.element_size());
  }
  return out;
}

void write_archive(const fs::path& file, const TensorArchive& archive) {
  auto bytes = encode_archive(archive);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + file.string());
}

TensorArchive decode_archive(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw DataError("corrupt checkpoint " + origin + ": bad magic");
  auto version = r.u32();
  if (version != kArchiveVersion)
    throw DataError("checkpoint " + origin + " has format version " + std::to_string(version) +
                    ", this build reads version " + std::to_string(kArchiveVersion));
  TensorArchive archive;
  archive.config = r.str();
  auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.str();
    auto code = r.u8();
    if (code > static_cast<std::uint8_t>(DType::I64))
      throw DataError("corrupt checkpoint " + origin + ": dtype code " + std::to_string(code));
    auto type = scalar_type(static_cast<DType>(code));
    auto rank = r.u8();
    std::vector<std::int64_t> dims;
    std::int64_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      dims.push_back(r.u32());
      numel *= dims.back();
    }
    auto t = torch::empty(dims, torch::TensorOptions().dtype(type));
    auto payload = r.take(static_cast<std::size_t>(numel) * t.element_size());
    std::memcpy(t.data_ptr(), payload, static_cast<std::size_t>(numel) * t.element_size());
    nt.tensor = t;
    archive.tensors.push_back(std::move(nt));
  }
  if (!r.done()) throw DataError("corrupt checkpoint " + origin + ": trailing bytes");
  return archive;
}

TensorArchive read_archive(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes, file.string());
}

}  // namespace cs4l
