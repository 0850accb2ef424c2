#include "cs4l/mat_v5.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>

#include "cs4l/errors.hpp"

namespace cs4l {
namespace fs = std::filesystem;

namespace {

enum : std::uint32_t {
  miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5, miUINT32 = 6,
  miSINGLE = 7, miDOUBLE = 9, miINT64 = 12, miUINT64 = 13, miMATRIX = 14, miCOMPRESSED = 15,
};

struct Element {
  std::uint32_t type = 0;
  const std::uint8_t* data = nullptr;
  std::size_t size = 0;
};

template <typename T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// Reads one tagged element at `pos` and advances past its 8-byte padding.
Element next_element(const std::uint8_t* base, std::size_t len, std::size_t& pos, const std::string& origin) {
  if (len - pos < 8) throw DataError("truncated MAT element in " + origin);
  auto word = load<std::uint32_t>(base + pos);
  Element e;
  if (word >> 16) {  // small data element: type and size share the first word
    e.type = word & 0xffff;
    e.size = word >> 16;
    e.data = base + pos + 4;
    pos += 8;
    return e;
  }
  e.type = word;
  e.size = load<std::uint32_t>(base + pos + 4);
  if (len - pos - 8 < e.size) throw DataError("truncated MAT element in " + origin);
  e.data = base + pos + 8;
  pos += 8 + e.size;
  if (e.type != miCOMPRESSED) pos = (pos + 7) & ~std::size_t{7};
  return e;
}

std::vector<std::uint8_t> inflate_all(const Element& e, const std::string& origin) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw DataError("zlib init failed");
  zs.next_in = const_cast<Bytef*>(e.data);
  zs.avail_in = static_cast<uInt>(e.size);
  std::vector<std::uint8_t> out;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    out.resize(out.size() + (1 << 20));
    zs.next_out = out.data() + zs.total_out;
    zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("corrupt compressed element in " + origin);
    }
  }
  out.resize(zs.total_out);
  inflateEnd(&zs);
  return out;
}

struct Array {
  std::vector<std::int64_t> dims;
  std::uint32_t data_type = 0;
  std::vector<std::uint8_t> raw;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
  double value(std::size_t i) const {
    const std::uint8_t* p = raw.data();
    switch (data_type) {
      case miINT8: return load<std::int8_t>(p + i);
      case miUINT8: return p[i];
      case miINT16: return load<std::int16_t>(p + 2 * i);
      case miUINT16: return load<std::uint16_t>(p + 2 * i);
      case miINT32: return load<std::int32_t>(p + 4 * i);
      case miUINT32: return load<std::uint32_t>(p + 4 * i);
      case miSINGLE: return load<float>(p + 4 * i);
      case miDOUBLE: return load<double>(p + 8 * i);
      case miINT64: return static_cast<double>(load<std::int64_t>(p + 8 * i));
      case miUINT64: return static_cast<double>(load<std::uint64_t>(p + 8 * i));
    }
    throw DataError("unsupported MAT numeric type " + std::to_string(data_type));
  }
};

std::size_t type_bytes(std::uint32_t t) {
  switch (t) {
    case miINT8: case miUINT8: return 1;
    case miINT16: case miUINT16: return 2;
    case miINT32: case miUINT32: case miSINGLE: return 4;
    case miDOUBLE: case miINT64: case miUINT64: return 8;
  }
  return 0;
}

void parse_matrix(const Element& m, std::map<std::string, Array>& out, const std::string& origin) {
  std::size_t pos = 0;
  next_element(m.data, m.size, pos, origin);  // array flags
  auto dims = next_element(m.data, m.size, pos, origin);
  auto name = next_element(m.data, m.size, pos, origin);
  Array a;
  for (std::size_t i = 0; i + 4 <= dims.size; i += 4) a.dims.push_back(load<std::int32_t>(dims.data + i));
  auto real = next_element(m.data, m.size, pos, origin);
  a.data_type = real.type;
  if (type_bytes(a.data_type) == 0 || real.size != a.count() * type_bytes(a.data_type))
    throw DataError("unsupported or inconsistent MAT array in " + origin);
  a.raw.assign(real.data, real.data + real.size);
  out[std::string(reinterpret_cast<const char*>(name.data), name.size)] = std::move(a);
}

}  // namespace

Container read_svhn_mat(const fs::path& file) {
  const std::string origin = file.string();
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + origin);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 128 || bytes[126] != 'I' || bytes[127] != 'M')
    throw DataError(origin + " is not a little-endian MATLAB level-5 file");
  if (bytes[124] == 0x00 && bytes[125] == 0x02)
    throw DataError(origin + " is a MATLAB v7.3 (HDF5) file; save it with -v7 or older");

  std::map<std::string, Array> arrays;
  std::size_t pos = 128;
  while (pos < bytes.size()) {
    auto e = next_element(bytes.data(), bytes.size(), pos, origin);
    if (e.type == miCOMPRESSED) {
      auto inflated = inflate_all(e, origin);
      std::size_t ipos = 0;
      auto inner = next_element(inflated.data(), inflated.size(), ipos, origin);
      if (inner.type == miMATRIX) parse_matrix(inner, arrays, origin);
    } else if (e.type == miMATRIX) {
      parse_matrix(e, arrays, origin);
    }
  }
  auto xi = arrays.find("X");
  auto yi = arrays.find("y");
  if (xi == arrays.end() || yi == arrays.end()) throw DataError(origin + " lacks the X and y arrays");
  const auto& x = xi->second;
  const auto& y = yi->second;
  if (x.dims.size() != 4 || x.dims[2] != 3 || x.data_type != miUINT8)
    throw DataError(origin + ": X must be an H x W x 3 x N uint8 array");
  const auto h = x.dims[0], w = x.dims[1], n = x.dims[3];
  if (static_cast<std::int64_t>(y.count()) != n) throw DataError(origin + ": label count differs from image count");

  Container c;
  c.height = static_cast<int>(h);
  c.width = static_cast<int>(w);
  c.channels = 3;
  c.labels.emplace();
  c.images.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    ImageU8 img(c.height, c.width, 3);
    for (int ch = 0; ch < 3; ++ch)
      for (std::int64_t col = 0; col < w; ++col)
        for (std::int64_t row = 0; row < h; ++row)
          img.at(static_cast<int>(row), static_cast<int>(col), ch) =
              x.raw[static_cast<std::size_t>(row + h * (col + w * (ch + 3 * i)))];
    c.images.push_back(std::move(img));
    double label = y.value(static_cast<std::size_t>(i));
    if (label < 1 || label > 10 || label != static_cast<int>(label))
      throw DataError(origin + ": label " + std::to_string(label) + " outside 1..10 at record " + std::to_string(i));
    c.labels->push_back(static_cast<std::uint8_t>(static_cast<int>(label) % 10));
  }
  return c;
}

}  // namespace cs4l
