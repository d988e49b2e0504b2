#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace relkit {

// A rank-1 or rank-2 float32 tensor as stored in an RFB1 file.
// Rank 2 is row-major: dims = {rows, cols}; audio features are F rows by T
// frames, text/CLAP embeddings are rank 1.
struct FeatureTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t rank() const { return dims.size(); }
  std::size_t rows() const { return dims.empty() ? 0 : dims[0]; }
  std::size_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  static FeatureTensor vector(std::vector<float> values);
  static FeatureTensor matrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> values);

  bool operator==(const FeatureTensor&) const = default;
};

inline constexpr char kRfbMagic[4] = {'R', 'F', 'B', '1'};

// Bytes of an RFB1 file. Throws NumericError on non-finite payload values and
// DataError on inconsistent dims.
std::vector<std::uint8_t> encode_rfb(const FeatureTensor& t);
// Throws DataError on bad magic, unsupported rank, dimension overflow,
// truncated payload or trailing bytes.
FeatureTensor decode_rfb(std::span<const std::uint8_t> bytes);

FeatureTensor read_feature(const std::filesystem::path& path);
void write_feature(const std::filesystem::path& path, const FeatureTensor& t);

// Per-pair files live at <dir>/<pair_id>.rfb.
std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& pair_id);

}  // namespace relkit
