#include <gtest/gtest.h>

#include <bit>
#include <chrono>
#include <cstring>
#include <functional>
#include <limits>
#include <random>

#include "slotpath/bnn.hpp"
#include "slotpath/bytes.hpp"
#include "test_support.hpp"

using namespace slotpath;
using slotpath::testing::random_bytes;
using slotpath::testing::random_model;
using slotpath::testing::TempDir;

namespace {

// Straight from the definition: ±1 products, sign with sign(0) = +1,
// output accumulated in double in ascending hidden order.
double textbook_score(const ModelWeights& m, std::span<const std::uint8_t> x) {
  const auto d = m.shape().input_bits;
  double y = 0.0;
  for (std::size_t n = 0; n < m.shape().hidden_width; ++n) {
    const auto row = m.w1_row(n);
    long long s = m.b1()[n];
    for (std::size_t i = 0; i < d; ++i) {
      const int w = ((row[i / 8] >> (i % 8)) & 1) ? 1 : -1;
      const int v = ((x[i / 8] >> (i % 8)) & 1) ? 1 : -1;
      s += w * v;
    }
    y += static_cast<double>(m.w2()[n]) * (s >= 0 ? 1.0 : -1.0);
  }
  return y + static_cast<double>(m.b2());
}

ModelWeights uniform_model(ModelShape shape, std::uint8_t w1_byte, std::int8_t b1, float w2, float b2) {
  return ModelWeights(shape, std::vector<std::uint8_t>(shape.hidden_width * shape.row_bytes(), w1_byte),
                      std::vector<std::int8_t>(shape.hidden_width, b1),
                      std::vector<float>(shape.hidden_width, w2), b2);
}

std::vector<std::vector<std::uint8_t>> adversarial_payloads(std::size_t bytes) {
  return {std::vector<std::uint8_t>(bytes, 0x00), std::vector<std::uint8_t>(bytes, 0xFF),
          std::vector<std::uint8_t>(bytes, 0x55), std::vector<std::uint8_t>(bytes, 0xAA)};
}

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Bnn, AllZeroWeightsAndInputsScorePlusHiddenWidth) {
  const auto m = uniform_model(kH32Shape, 0x00, 0, 1.0f, 0.0f);
  const std::vector<std::uint8_t> x(kPayloadBytes, 0x00);
  for (auto matches : hidden_matches_fast(m, PayloadView(x))) EXPECT_EQ(matches, 8192);
  EXPECT_EQ(infer_fast(m, PayloadView(x)).value, 32.0);
  EXPECT_EQ(infer_reference(m, PayloadView(x)).value, 32.0);
}

TEST(Bnn, AllOneInputsScoreMinusHiddenWidth) {
  const auto m = uniform_model(kH32Shape, 0x00, 0, 1.0f, 0.0f);
  const std::vector<std::uint8_t> x(kPayloadBytes, 0xFF);
  for (auto matches : hidden_matches_fast(m, PayloadView(x))) EXPECT_EQ(matches, 0);
  for (auto pre : hidden_preactivations_reference(m, PayloadView(x))) EXPECT_EQ(pre, -8192);
  EXPECT_EQ(infer_fast(m, PayloadView(x)).value, -32.0);
  EXPECT_EQ(infer_reference(m, PayloadView(x)).value, -32.0);
}

TEST(Bnn, TieGoesPositive) {
  const ModelShape shape{64, 1};
  // Row agrees with x on the low 32 bits and disagrees on the high 32.
  std::vector<std::uint8_t> w1(8, 0x00);
  std::vector<std::uint8_t> x{0, 0, 0, 0, 0xFF, 0xFF, 0xFF, 0xFF};
  const ModelWeights m(shape, w1, {0}, {1.0f}, 0.0f);
  EXPECT_EQ(hidden_matches_fast(m, PayloadView(x))[0], 32);
  EXPECT_EQ(hidden_preactivations_reference(m, PayloadView(x))[0], 0);
  EXPECT_EQ(infer_fast(m, PayloadView(x)).value, 1.0);
  EXPECT_EQ(infer_reference(m, PayloadView(x)).value, 1.0);
}

TEST(Bnn, HandEnumeratedSixteenBitToy) {
  const ModelShape shape{16, 2};
  const std::vector<std::uint8_t> x{0b1011'0010, 0b0101'0101};
  // Row 0 equals x: 16 matches. Row 1: byte 0 is ~x[0] (0 matches), byte 1
  // differs from x[1] only in bit 0 (7 matches).
  const std::vector<std::uint8_t> w1{0b1011'0010, 0b0101'0101, 0b0100'1101, 0b0101'0100};
  ModelWeights m(shape, w1, {0, 0}, {0.5f, 0.25f}, 0.125f);
  EXPECT_EQ(hidden_matches_reference(m, PayloadView(x)), (std::vector<std::int32_t>{16, 7}));
  EXPECT_EQ(hidden_matches_fast(m, PayloadView(x)), (std::vector<std::int32_t>{16, 7}));
  EXPECT_EQ(hidden_preactivations_reference(m, PayloadView(x)), (std::vector<std::int64_t>{16, -2}));
  EXPECT_EQ(infer_fast(m, PayloadView(x)).value, 0.375);
  EXPECT_EQ(infer_reference(m, PayloadView(x)).value, 0.375);

  // b1 = 2 lifts the second unit to exactly zero, which counts as +1.
  ModelWeights lifted(shape, w1, {0, 2}, {0.5f, 0.25f}, 0.125f);
  EXPECT_EQ(infer_fast(lifted, PayloadView(x)).value, 0.875);
  EXPECT_EQ(infer_reference(lifted, PayloadView(x)).value, 0.875);
}

TEST(Bnn, FastEqualsReferenceOnRandomPairs) {
  const auto start = std::chrono::steady_clock::now();
  for (const ModelShape shape : {kH32Shape, ModelShape{64, 4}}) {
    std::mt19937_64 rng(shape.input_bits * 31 + shape.hidden_width);
    for (int i = 0; i < 1000; ++i) {
      const auto m = random_model(shape, rng);
      const auto x = random_bytes(shape.row_bytes(), rng);
      const auto fast = infer_fast(m, PayloadView(x));
      const auto ref = infer_reference(m, PayloadView(x));
      ASSERT_EQ(std::bit_cast<std::uint64_t>(fast.value), std::bit_cast<std::uint64_t>(ref.value))
          << "shape " << shape.input_bits << "x" << shape.hidden_width << " case " << i;
      ASSERT_EQ(hidden_matches_fast(m, PayloadView(x)), hidden_matches_reference(m, PayloadView(x)));
    }
    for (int i = 0; i < 50; ++i) {
      const auto m = random_model(shape, rng);
      for (const auto& x : adversarial_payloads(shape.row_bytes())) {
        ASSERT_EQ(infer_fast(m, PayloadView(x)), infer_reference(m, PayloadView(x)));
      }
    }
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST(Bnn, ReferenceMatchesTextbookDefinition) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const ModelShape shape{64 * (1 + rng() % 4), 1 + rng() % 6};
    const auto m = random_model(shape, rng);
    const auto x = random_bytes(shape.row_bytes(), rng);
    EXPECT_EQ(infer_reference(m, PayloadView(x)).value, textbook_score(m, x));
  }
  const auto m = random_model(kH32Shape, rng);
  const auto x = random_bytes(kPayloadBytes, rng);
  EXPECT_EQ(infer_fast(m, PayloadView(x)).value, textbook_score(m, x));
}

TEST(Bnn, NonWordMultipleWidthsAgree) {
  std::mt19937_64 rng(6);
  for (std::size_t d : {8u, 16u, 24u, 72u, 200u}) {
    for (int i = 0; i < 100; ++i) {
      const auto m = random_model(ModelShape{d, 3}, rng);
      const auto x = random_bytes(d / 8, rng);
      ASSERT_EQ(infer_fast(m, PayloadView(x)), infer_reference(m, PayloadView(x))) << d;
    }
  }
}

TEST(Bnn, FlippingEveryInputBitNegatesPreactivations) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto base = random_model(ModelShape{512, 8}, rng);
    const ModelWeights m(base.shape(), std::vector<std::uint8_t>(base.w1_packed().begin(), base.w1_packed().end()),
                         std::vector<std::int8_t>(8, 0), std::vector<float>(base.w2().begin(), base.w2().end()),
                         base.b2());
    auto x = random_bytes(64, rng);
    const auto pre = hidden_preactivations_reference(m, PayloadView(x));
    for (auto& b : x) b = static_cast<std::uint8_t>(~b);
    const auto flipped = hidden_preactivations_reference(m, PayloadView(x));
    for (std::size_t n = 0; n < pre.size(); ++n) EXPECT_EQ(flipped[n], -pre[n]);
  }
}

TEST(Bnn, PreactivationsStayInBounds) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_model(ModelShape{256, 4}, rng);
    const auto x = random_bytes(32, rng);
    const auto pre = hidden_preactivations_reference(m, PayloadView(x));
    for (std::size_t n = 0; n < pre.size(); ++n) {
      EXPECT_GE(pre[n], -256 + m.b1()[n]);
      EXPECT_LE(pre[n], 256 + m.b1()[n]);
      EXPECT_EQ((pre[n] - m.b1()[n]) % 2, 0);
    }
  }
}

TEST(Bnn, SerializedSizes) {
  EXPECT_EQ(kH32Shape.serialized_bytes(), 32932u);
  EXPECT_EQ((ModelShape{64, 4}.serialized_bytes()), 56u);
  std::mt19937_64 rng(9);
  for (std::size_t d = 8; d <= 256; d += 8) {
    for (std::size_t h = 1; h <= 5; ++h) {
      const auto m = random_model(ModelShape{d, h}, rng);
      EXPECT_EQ(serialize_model(m).size(), h * d / 8 + 5 * h + 4);
    }
  }
}

TEST(Bnn, WeightFileLayout) {
  const ModelShape shape{16, 2};
  const ModelWeights m(shape, {1, 2, 3, 4}, {-1, 5}, {1.0f, -2.0f}, 0.5f);
  const auto bytes = serialize_model(m);
  ASSERT_EQ(bytes.size(), 4u + 2 + 8 + 4);
  EXPECT_EQ((std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4)), (std::vector<std::uint8_t>{1, 2, 3, 4}));
  EXPECT_EQ(bytes[4], 0xFF);
  EXPECT_EQ(bytes[5], 5);
  // 1.0f = 0x3F800000, -2.0f = 0xC0000000, 0.5f = 0x3F000000, little-endian.
  EXPECT_EQ((std::vector<std::uint8_t>(bytes.begin() + 6, bytes.end())),
            (std::vector<std::uint8_t>{0, 0, 0x80, 0x3F, 0, 0, 0, 0xC0, 0, 0, 0, 0x3F}));
}

TEST(Bnn, SaveLoadRoundTripsBitExactly) {
  std::mt19937_64 rng(10);
  TempDir dir;
  for (int i = 0; i < 1000; ++i) {
    const ModelShape shape = i % 10 == 0 ? kH32Shape : ModelShape{8 * (1 + rng() % 64), 1 + rng() % 8};
    auto m = random_model(shape, rng);
    const auto bytes = serialize_model(m);
    const auto back = deserialize_model(bytes, shape);
    ASSERT_EQ(back, m);
    ASSERT_EQ(serialize_model(back), bytes);
  }
  // Unusual float bit patterns survive too.
  const ModelShape shape{8, 2};
  const float neg_zero = -0.0f;
  const float tiny = std::numeric_limits<float>::denorm_min();
  const ModelWeights odd(shape, {0xAA, 0x55}, {-128, 127}, {neg_zero, tiny}, -1e-30f);
  EXPECT_EQ(deserialize_model(serialize_model(odd), shape), odd);

  const auto h32 = random_model(kH32Shape, rng);
  save_model(h32, dir / "slot0.bin");
  EXPECT_EQ(std::filesystem::file_size(dir / "slot0.bin"), 32932u);
  EXPECT_EQ(load_model(dir / "slot0.bin"), h32);
  EXPECT_EQ(load_model(dir / "slot0.bin", kH32Shape), h32);
}

TEST(Bnn, LoadInfersHiddenWidthFromSize) {
  std::mt19937_64 rng(11);
  TempDir dir;
  const auto m = random_model(ModelShape{kPayloadBits, 16}, rng);
  save_model(m, dir / "h16.bin");
  const auto back = load_model(dir / "h16.bin");
  EXPECT_EQ(back.shape().hidden_width, 16u);
  EXPECT_EQ(back, m);
}

TEST(Bnn, TruncatedAndOversizedFilesAreRejected) {
  std::mt19937_64 rng(12);
  const auto bytes = serialize_model(random_model(kH32Shape, rng));
  EXPECT_EQ(error_of([&] { deserialize_model(std::span(bytes).first(32931), kH32Shape); }), Errc::SizeMismatch);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(error_of([&] { deserialize_model(longer, kH32Shape); }), Errc::SizeMismatch);
  EXPECT_EQ(error_of([&] { deserialize_model(std::span(bytes).first(32931), kPayloadBits); }), Errc::SizeMismatch);

  TempDir dir;
  write_file(dir / "short.bin", std::span(bytes).first(32931));
  EXPECT_EQ(error_of([&] { load_model(dir / "short.bin"); }), Errc::SizeMismatch);
  EXPECT_EQ(error_of([&] { load_model(dir / "missing.bin"); }), Errc::Io);
}

TEST(Bnn, InconsistentShapesAreRejected) {
  EXPECT_EQ(error_of([] { ModelWeights(ModelShape{16, 2}, {1, 2, 3}, {0, 0}, {1, 1}, 0); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([] { ModelWeights(ModelShape{16, 2}, {1, 2, 3, 4}, {0}, {1, 1}, 0); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([] { ModelWeights(ModelShape{12, 1}, {1, 2}, {0}, {1}, 0); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([] { ModelWeights(ModelShape{16, 0}, {}, {}, {}, 0); }), Errc::DimensionMismatch);
}

TEST(Bnn, InputWidthMismatchIsRejected) {
  std::mt19937_64 rng(13);
  const auto m = random_model(kH32Shape, rng);
  const std::vector<std::uint8_t> x(64, 0);
  EXPECT_EQ(error_of([&] { infer_fast(m, PayloadView(x)); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([&] { infer_reference(m, PayloadView(x)); }), Errc::DimensionMismatch);
}

TEST(Bnn, CostModel) {
  const auto c = cost_model(kH32Shape);
  EXPECT_EQ(c.hidden_ops, 262144u);
  EXPECT_EQ(c.output_ops, 32u);
  EXPECT_EQ(c.selection_ops, 1u);
  EXPECT_EQ(cost_model(ModelShape{8, 1}).hidden_ops, 8u);
  EXPECT_EQ(cost_model(ModelShape{64, 4}).selection_ops, c.selection_ops);
}
