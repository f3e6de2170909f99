#pragma once

// Two-layer binary network:
//   h = sign(W1 x + b1)   with W1, x in {-1,+1}, sign(0) = +1
//   y = w2 . h + b2
// W1 rows are bit-packed with the same convention as PayloadView.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "slotpath/packet_format.hpp"

namespace slotpath {

struct ModelShape {
  std::size_t input_bits = kPayloadBits;
  std::size_t hidden_width = 32;

  constexpr std::size_t row_bytes() const noexcept { return input_bits / 8; }

  /// Size of the header-less weight file: h*d/8 + h + 4h + 4.
  constexpr std::size_t serialized_bytes() const noexcept {
    return hidden_width * row_bytes() + hidden_width + 4 * hidden_width + 4;
  }

  friend constexpr bool operator==(const ModelShape&, const ModelShape&) = default;
};

inline constexpr ModelShape kH32Shape{kPayloadBits, 32};

class ModelWeights {
 public:
  /// Throws Error(DimensionMismatch) if any array disagrees with `shape`,
  /// or if d is zero or not a multiple of 8.
  ModelWeights(ModelShape shape, std::vector<std::uint8_t> w1_packed, std::vector<std::int8_t> b1,
               std::vector<float> w2, float b2);

  const ModelShape& shape() const noexcept { return shape_; }
  std::span<const std::uint8_t> w1_packed() const noexcept { return w1_; }
  std::span<const std::uint8_t> w1_row(std::size_t n) const noexcept {
    return std::span<const std::uint8_t>(w1_).subspan(n * shape_.row_bytes(), shape_.row_bytes());
  }
  std::span<const std::int8_t> b1() const noexcept { return b1_; }
  std::span<const float> w2() const noexcept { return w2_; }
  float b2() const noexcept { return b2_; }

  /// Bitwise equality, floats compared by bit pattern.
  friend bool operator==(const ModelWeights& a, const ModelWeights& b) noexcept;

 private:
  ModelShape shape_;
  std::vector<std::uint8_t> w1_;
  std::vector<std::int8_t> b1_;
  std::vector<float> w2_;
  float b2_;
};

struct Score {
  double value = 0.0;
  friend bool operator==(const Score&, const Score&) = default;
};

/// XNOR/popcount execution over 64-bit words. Throws Error(DimensionMismatch)
/// when the payload bit count differs from the model's input width.
Score infer_fast(const ModelWeights& model, PayloadView payload);

/// Per-bit ±1 multiply-accumulate. Independent of the packed path; used as
/// the oracle for infer_fast. Same tie rule and output summation order.
Score infer_reference(const ModelWeights& model, PayloadView payload);

/// Matching-bit counts per hidden unit, one value per row.
std::vector<std::int32_t> hidden_matches_fast(const ModelWeights& model, PayloadView payload);
std::vector<std::int32_t> hidden_matches_reference(const ModelWeights& model, PayloadView payload);

/// Hidden pre-activations (2*matches - d + b1), computed by the reference path.
std::vector<std::int64_t> hidden_preactivations_reference(const ModelWeights& model,
                                                          PayloadView payload);

// File layout, no header: W1 rows | b1 (int8 x h) | w2 (LE f32 x h) | b2 (LE f32).
std::vector<std::uint8_t> serialize_model(const ModelWeights& model);
/// Exact-shape decode; Error(SizeMismatch) when the byte count does not fit.
ModelWeights deserialize_model(std::span<const std::uint8_t> bytes, ModelShape shape);
/// Infers the hidden width from the byte count for a given input width.
ModelWeights deserialize_model(std::span<const std::uint8_t> bytes,
                               std::size_t input_bits = kPayloadBits);

void save_model(const ModelWeights& model, const std::filesystem::path& path);
ModelWeights load_model(const std::filesystem::path& path, ModelShape shape);
ModelWeights load_model(const std::filesystem::path& path, std::size_t input_bits = kPayloadBits);

/// Structural per-packet operation counts: one lookup, d*h binary MACs, h output MACs.
struct CostModel {
  std::uint64_t selection_ops = 1;
  std::uint64_t hidden_ops = 0;
  std::uint64_t output_ops = 0;
};

CostModel cost_model(const ModelShape& shape) noexcept;
inline CostModel cost_model(const ModelWeights& model) noexcept { return cost_model(model.shape()); }

}  // namespace slotpath
