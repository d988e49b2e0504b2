#include "relkit/feature_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "relkit/error.hpp"

namespace relkit {
namespace {

// Upper bound on element count; keeps size arithmetic far from overflow.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[off + i]} << (8 * i);
  return v;
}

std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    n *= d;
    if (n > kMaxElements) throw DataError("dimension overflow");
  }
  return n;
}

}  // namespace

FeatureTensor FeatureTensor::vector(std::vector<float> values) {
  FeatureTensor t;
  t.dims = {static_cast<std::uint32_t>(values.size())};
  t.data = std::move(values);
  return t;
}

FeatureTensor FeatureTensor::matrix(std::uint32_t rows, std::uint32_t cols,
                                    std::vector<float> values) {
  if (static_cast<std::uint64_t>(rows) * cols != values.size())
    throw DataError("matrix payload size does not match dims");
  FeatureTensor t;
  t.dims = {rows, cols};
  t.data = std::move(values);
  return t;
}

std::vector<std::uint8_t> encode_rfb(const FeatureTensor& t) {
  if (t.dims.size() != 1 && t.dims.size() != 2) throw DataError("RFB1 rank must be 1 or 2");
  if (element_count(t.dims) != t.data.size()) throw DataError("payload size does not match dims");
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.dims.size() + 4 * t.data.size());
  out.insert(out.end(), std::begin(kRfbMagic), std::end(kRfbMagic));
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  for (float v : t.data) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in feature payload");
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

FeatureTensor decode_rfb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw DataError("truncated header");
  if (std::memcmp(bytes.data(), kRfbMagic, 4) != 0) throw DataError("bad magic");
  const auto rank = get_u32(bytes, 4);
  if (rank != 1 && rank != 2) throw DataError("unsupported rank " + std::to_string(rank));
  if (bytes.size() < 8 + 4 * std::size_t{rank}) throw DataError("truncated header");
  FeatureTensor t;
  for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(get_u32(bytes, 8 + 4 * i));
  const auto n = element_count(t.dims);
  const std::size_t header = 8 + 4 * std::size_t{rank};
  const std::uint64_t expected = header + 4 * n;
  if (bytes.size() < expected) throw DataError("truncated payload");
  if (bytes.size() > expected) throw DataError("trailing bytes after payload");
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  return t;
}

FeatureTensor read_feature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing feature file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_rfb(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_feature(const std::filesystem::path& path, const FeatureTensor& t) {
  auto bytes = encode_rfb(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& pair_id) {
  return dir / (pair_id + ".rfb");
}

}  // namespace relkit
