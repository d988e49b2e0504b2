#include "relkit/predictor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "relkit/error.hpp"

namespace relkit::predictor {
namespace {

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& cfg, const ModelParams& params) {
  std::vector<std::uint8_t> out = {'R', 'K', 'P', 'T'};
  put<std::uint32_t>(out, kCheckpointVersion);
  for (std::uint64_t v : {std::uint64_t{cfg.audio_dim}, std::uint64_t{cfg.text_dim},
                          std::uint64_t{cfg.listener_dim}, std::uint64_t{cfg.hidden},
                          std::uint64_t{cfg.head_hidden}, std::uint64_t{cfg.num_listeners}, cfg.seed}) {
    put<std::uint64_t>(out, v);
  }
  const auto tensors = params.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->cols()));
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>((*t)(r, c)));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.bytes(4) != "RKPT") throw DataError("checkpoint: bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config.audio_dim = in.get<std::uint64_t>();
  ck.config.text_dim = in.get<std::uint64_t>();
  ck.config.listener_dim = in.get<std::uint64_t>();
  ck.config.hidden = in.get<std::uint64_t>();
  ck.config.head_hidden = in.get<std::uint64_t>();
  ck.config.num_listeners = in.get<std::uint64_t>();
  ck.config.seed = in.get<std::uint64_t>();
  try {
    ck.config.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  ck.params = ModelParams::zeros(ck.config);
  auto tensors = ck.params.tensors();
  if (in.get<std::uint32_t>() != tensors.size()) throw DataError("checkpoint: tensor count mismatch");
  for (auto& [name, t] : tensors) {
    const auto len = in.get<std::uint32_t>();
    if (in.bytes(len) != name) throw DataError("checkpoint: expected tensor " + name);
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (rows != t->rows() || cols != t->cols()) throw DataError("checkpoint: bad shape for " + name);
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) (*t)(r, c) = std::bit_cast<double>(in.get<std::uint64_t>());
    }
    if (!t->allFinite()) throw DataError("checkpoint: non-finite values in " + name);
  }
  if (!in.done()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params) {
  const auto bytes = encode_checkpoint(cfg, params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace relkit::predictor
