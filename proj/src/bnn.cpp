#include "slotpath/bnn.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>
#include <string>

#include "slotpath/bytes.hpp"

namespace slotpath {
namespace {

void require_input_width(const ModelWeights& model, PayloadView payload) {
  if (payload.bit_count() != model.shape().input_bits) {
    throw Error(Errc::DimensionMismatch,
                "payload has " + std::to_string(payload.bit_count()) + " bits, model expects " +
                    std::to_string(model.shape().input_bits));
  }
}

inline std::uint64_t load_word(const std::uint8_t* p) noexcept {
  std::uint64_t w;
  std::memcpy(&w, p, sizeof w);
  if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap64(w);
  return w;
}

// Number of positions where the row and the input differ.
inline std::uint32_t mismatches(const std::uint8_t* row, const std::uint8_t* x,
                                std::size_t bytes) noexcept {
  std::size_t i = 0;
  std::uint64_t c0 = 0, c1 = 0, c2 = 0, c3 = 0;
  for (; i + 32 <= bytes; i += 32) {
    c0 += std::popcount(load_word(row + i) ^ load_word(x + i));
    c1 += std::popcount(load_word(row + i + 8) ^ load_word(x + i + 8));
    c2 += std::popcount(load_word(row + i + 16) ^ load_word(x + i + 16));
    c3 += std::popcount(load_word(row + i + 24) ^ load_word(x + i + 24));
  }
  for (; i + 8 <= bytes; i += 8) c0 += std::popcount(load_word(row + i) ^ load_word(x + i));
  for (; i < bytes; ++i) c0 += std::popcount(static_cast<unsigned>(row[i] ^ x[i]));
  return static_cast<std::uint32_t>(c0 + c1 + c2 + c3);
}

inline unsigned row_bit(std::span<const std::uint8_t> row, std::size_t j) noexcept {
  return (row[j >> 3] >> (j & 7u)) & 1u;
}

}  // namespace

ModelWeights::ModelWeights(ModelShape shape, std::vector<std::uint8_t> w1_packed,
                           std::vector<std::int8_t> b1, std::vector<float> w2, float b2)
    : shape_(shape), w1_(std::move(w1_packed)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(b2) {
  if (shape_.input_bits == 0 || shape_.input_bits % 8 != 0 || shape_.hidden_width == 0) {
    throw Error(Errc::DimensionMismatch, "input width must be a positive multiple of 8 and "
                                         "hidden width positive");
  }
  if (w1_.size() != shape_.hidden_width * shape_.row_bytes() ||
      b1_.size() != shape_.hidden_width || w2_.size() != shape_.hidden_width) {
    throw Error(Errc::DimensionMismatch, "weight arrays do not match (d=" +
                                             std::to_string(shape_.input_bits) + ", h=" +
                                             std::to_string(shape_.hidden_width) + ")");
  }
}

bool operator==(const ModelWeights& a, const ModelWeights& b) noexcept {
  if (a.shape_ != b.shape_ || a.w1_ != b.w1_ || a.b1_ != b.b1_) return false;
  for (std::size_t n = 0; n < a.w2_.size(); ++n) {
    if (std::bit_cast<std::uint32_t>(a.w2_[n]) != std::bit_cast<std::uint32_t>(b.w2_[n])) {
      return false;
    }
  }
  return std::bit_cast<std::uint32_t>(a.b2_) == std::bit_cast<std::uint32_t>(b.b2_);
}

Score infer_fast(const ModelWeights& model, PayloadView payload) {
  require_input_width(model, payload);
  const auto& shape = model.shape();
  const auto d = static_cast<std::int64_t>(shape.input_bits);
  const std::uint8_t* w1 = model.w1_packed().data();
  const std::uint8_t* x = payload.bytes().data();
  const auto b1 = model.b1();
  const auto w2 = model.w2();

  double y = 0.0;
  for (std::size_t n = 0; n < shape.hidden_width; ++n) {
    const auto miss = static_cast<std::int64_t>(
        mismatches(w1 + n * shape.row_bytes(), x, shape.row_bytes()));
    // 2*matches - d == d - 2*mismatches
    const std::int64_t pre = d - 2 * miss + b1[n];
    y += static_cast<double>(w2[n]) * (pre >= 0 ? 1.0 : -1.0);
  }
  y += static_cast<double>(model.b2());
  return Score{y};
}

std::vector<std::int32_t> hidden_matches_fast(const ModelWeights& model, PayloadView payload) {
  require_input_width(model, payload);
  const auto& shape = model.shape();
  std::vector<std::int32_t> out(shape.hidden_width);
  for (std::size_t n = 0; n < shape.hidden_width; ++n) {
    out[n] = static_cast<std::int32_t>(shape.input_bits) -
             static_cast<std::int32_t>(mismatches(model.w1_row(n).data(),
                                                  payload.bytes().data(), shape.row_bytes()));
  }
  return out;
}

std::vector<std::int32_t> hidden_matches_reference(const ModelWeights& model,
                                                   PayloadView payload) {
  require_input_width(model, payload);
  const auto& shape = model.shape();
  std::vector<std::int32_t> out(shape.hidden_width, 0);
  for (std::size_t n = 0; n < shape.hidden_width; ++n) {
    const auto row = model.w1_row(n);
    for (std::size_t j = 0; j < shape.input_bits; ++j) {
      if (row_bit(row, j) == payload.bit(j)) ++out[n];
    }
  }
  return out;
}

std::vector<std::int64_t> hidden_preactivations_reference(const ModelWeights& model,
                                                          PayloadView payload) {
  require_input_width(model, payload);
  const auto& shape = model.shape();
  const auto d = static_cast<std::int64_t>(shape.input_bits);
  const auto b1 = model.b1();
  const auto [lo_b, hi_b] = std::minmax_element(b1.begin(), b1.end());

  std::vector<std::int64_t> pre(shape.hidden_width);
  for (std::size_t n = 0; n < shape.hidden_width; ++n) {
    const auto row = model.w1_row(n);
    std::int64_t acc = 0;
    for (std::size_t j = 0; j < shape.input_bits; ++j) {
      const int w = row_bit(row, j) != 0 ? 1 : -1;
      acc += w * payload.value(j);
    }
    pre[n] = acc + b1[n];
    if (pre[n] < -d + *lo_b || pre[n] > d + *hi_b) {
      throw std::logic_error("hidden pre-activation outside [-d + min(b1), d + max(b1)]");
    }
  }
  return pre;
}

Score infer_reference(const ModelWeights& model, PayloadView payload) {
  const auto pre = hidden_preactivations_reference(model, payload);
  const auto w2 = model.w2();
  double y = 0.0;
  for (std::size_t n = 0; n < pre.size(); ++n) {
    const int h = pre[n] >= 0 ? 1 : -1;
    y += static_cast<double>(w2[n]) * static_cast<double>(h);
  }
  y += static_cast<double>(model.b2());
  return Score{y};
}

std::vector<std::uint8_t> serialize_model(const ModelWeights& model) {
  const auto& shape = model.shape();
  std::vector<std::uint8_t> out;
  out.reserve(shape.serialized_bytes());
  const auto w1 = model.w1_packed();
  out.insert(out.end(), w1.begin(), w1.end());
  for (const auto b : model.b1()) out.push_back(static_cast<std::uint8_t>(b));
  for (const auto w : model.w2()) append_le32(out, std::bit_cast<std::uint32_t>(w));
  append_le32(out, std::bit_cast<std::uint32_t>(model.b2()));
  return out;
}

ModelWeights deserialize_model(std::span<const std::uint8_t> bytes, ModelShape shape) {
  if (shape.input_bits == 0 || shape.input_bits % 8 != 0 || shape.hidden_width == 0) {
    throw Error(Errc::DimensionMismatch, "invalid model shape");
  }
  if (bytes.size() != shape.serialized_bytes()) {
    throw Error(Errc::SizeMismatch, "weight file is " + std::to_string(bytes.size()) +
                                        " bytes, expected " +
                                        std::to_string(shape.serialized_bytes()) + " for d=" +
                                        std::to_string(shape.input_bits) + ", h=" +
                                        std::to_string(shape.hidden_width));
  }
  const auto h = shape.hidden_width;
  const auto w1_bytes = h * shape.row_bytes();
  std::vector<std::uint8_t> w1(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(w1_bytes));
  std::vector<std::int8_t> b1(h);
  for (std::size_t n = 0; n < h; ++n) b1[n] = static_cast<std::int8_t>(bytes[w1_bytes + n]);
  std::vector<float> w2(h);
  const std::uint8_t* p = bytes.data() + w1_bytes + h;
  for (std::size_t n = 0; n < h; ++n, p += 4) w2[n] = std::bit_cast<float>(load_le32(p));
  const float b2 = std::bit_cast<float>(load_le32(p));
  return ModelWeights(shape, std::move(w1), std::move(b1), std::move(w2), b2);
}

ModelWeights deserialize_model(std::span<const std::uint8_t> bytes, std::size_t input_bits) {
  if (input_bits == 0 || input_bits % 8 != 0) {
    throw Error(Errc::DimensionMismatch, "input width must be a positive multiple of 8");
  }
  const std::size_t per_unit = input_bits / 8 + 5;
  if (bytes.size() < 4 + per_unit || (bytes.size() - 4) % per_unit != 0) {
    throw Error(Errc::SizeMismatch, "weight file of " + std::to_string(bytes.size()) +
                                        " bytes fits no hidden width for d=" +
                                        std::to_string(input_bits));
  }
  return deserialize_model(bytes, ModelShape{input_bits, (bytes.size() - 4) / per_unit});
}

void save_model(const ModelWeights& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

ModelWeights load_model(const std::filesystem::path& path, ModelShape shape) {
  return deserialize_model(read_file(path), shape);
}

ModelWeights load_model(const std::filesystem::path& path, std::size_t input_bits) {
  return deserialize_model(read_file(path), input_bits);
}

CostModel cost_model(const ModelShape& shape) noexcept {
  CostModel cost;
  cost.hidden_ops = static_cast<std::uint64_t>(shape.input_bits) * shape.hidden_width;
  cost.output_ops = shape.hidden_width;
  return cost;
}

}  // namespace slotpath
