#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <random>
#include <thread>

#include "slotpath/model_bank.hpp"
#include "test_support.hpp"

using namespace slotpath;
using slotpath::testing::random_model;
using slotpath::testing::TempDir;

namespace {

std::vector<ModelWeights> random_models(std::size_t k, ModelShape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ModelWeights> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(random_model(shape, rng));
  return out;
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

TEST(ModelBank, ResolveIsExhaustivelyCorrect) {
  for (std::size_t k : {1u, 2u, 16u}) {
    const auto models = random_models(k, ModelShape{64, 2}, k);
    const ModelBank bank(models);
    ASSERT_EQ(bank.size(), k);
    for (std::uint32_t id = 0; id < 2 * k; ++id) {
      Reg0Metadata meta;
      meta.slot_id = id;
      meta.format_version = kFormatVersion;
      if (id < k) {
        const auto slot = bank.resolve(meta);
        EXPECT_EQ(slot.value, id);
        EXPECT_EQ(bank.fetch(slot).weights, models[id]);
        EXPECT_EQ(bank.try_resolve(id), SlotIndex{id});
      } else {
        EXPECT_EQ(error_of([&] { bank.resolve(meta); }), Errc::SlotOutOfRange);
        EXPECT_FALSE(bank.try_resolve(id).has_value());
      }
    }
    EXPECT_FALSE(bank.try_resolve(0xFFFFFFFFu).has_value());
  }
}

TEST(ModelBank, Footprints) {
  const auto two = random_models(2, kH32Shape, 1);
  EXPECT_EQ(ModelBank(two).footprint_bytes(), 65864u);
  std::vector<ModelWeights> sixteen;
  for (int k = 0; k < 16; ++k) sixteen.push_back(two[k % 2]);
  EXPECT_EQ(ModelBank(sixteen).footprint_bytes(), 526912u);
}

TEST(ModelBank, LoadBankKeepsArgumentOrder) {
  TempDir dir;
  const auto models = random_models(3, kH32Shape, 2);
  std::vector<std::filesystem::path> paths;
  for (std::size_t k = 0; k < models.size(); ++k) {
    paths.push_back(dir / ("slot" + std::to_string(k) + ".bin"));
    save_model(models[k], paths.back());
    EXPECT_EQ(std::filesystem::file_size(paths.back()), 32932u);
  }
  const auto bank = load_bank(paths);
  EXPECT_EQ(bank.size(), 3u);
  EXPECT_EQ(bank.generation(), 0u);
  EXPECT_EQ(bank.footprint_bytes(), 3u * 32932u);
  for (std::uint32_t k = 0; k < 3; ++k) EXPECT_EQ(bank.fetch(SlotIndex{k}).weights, models[k]);
}

TEST(ModelBank, MixedWidthsAreRejected) {
  TempDir dir;
  std::mt19937_64 rng(3);
  save_model(random_model(kH32Shape, rng), dir / "h32.bin");
  save_model(random_model(ModelShape{kPayloadBits, 16}, rng), dir / "h16.bin");
  const std::vector<std::filesystem::path> paths{dir / "h32.bin", dir / "h16.bin"};
  EXPECT_EQ(error_of([&] { load_bank(paths); }), Errc::DimensionMismatch);
  EXPECT_EQ(error_of([] { load_bank({}); }), Errc::EmptyBank);
  EXPECT_EQ(error_of([] { ModelBank(std::vector<ModelWeights>{}); }), Errc::EmptyBank);
}

TEST(ModelBank, SwapPublishesNewModelAndBumpsGeneration) {
  auto models = random_models(3, ModelShape{64, 2}, 4);
  ModelBank bank(models);
  const auto* before = &bank.fetch(SlotIndex{1});
  bank.swap_slot(SlotIndex{1}, models[2]);
  EXPECT_EQ(bank.generation(), 1u);
  EXPECT_EQ(bank.fetch(SlotIndex{1}).weights, models[2]);
  EXPECT_EQ(bank.fetch(SlotIndex{1}).generation, 1u);
  EXPECT_EQ(bank.fetch(SlotIndex{0}).generation, 0u);
  // The old object stays valid.
  EXPECT_EQ(before->weights, models[1]);
  EXPECT_EQ(bank.retained_models(), 4u);

  EXPECT_EQ(error_of([&] { bank.swap_slot(SlotIndex{3}, models[0]); }), Errc::SlotOutOfRange);
  std::mt19937_64 rng(5);
  EXPECT_EQ(error_of([&] { bank.swap_slot(SlotIndex{0}, random_model(ModelShape{64, 3}, rng)); }),
            Errc::DimensionMismatch);
  EXPECT_EQ(bank.generation(), 1u);
}

TEST(ModelBank, ConcurrentSwapsNeverExposeTornModels) {
  // Each candidate is internally consistent: every w1 byte, b1 entry and w2
  // entry is derived from the same tag, so a mixed read would be visible.
  const ModelShape shape{256, 4};
  auto tagged = [&](std::uint8_t tag) {
    return ModelWeights(shape, std::vector<std::uint8_t>(shape.hidden_width * shape.row_bytes(), tag),
                        std::vector<std::int8_t>(shape.hidden_width, static_cast<std::int8_t>(tag % 100)),
                        std::vector<float>(shape.hidden_width, static_cast<float>(tag)), static_cast<float>(tag));
  };
  ModelBank bank(std::vector<ModelWeights>{tagged(0), tagged(1)});
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> reads{0}, torn{0};

  std::thread reader([&] {
    std::uint64_t last_gen = 0;
    while (!stop.load(std::memory_order_relaxed)) {
      const auto& rm = bank.fetch(SlotIndex{1});
      const auto tag = rm.weights.w1_packed()[0];
      bool ok = rm.weights.b2() == static_cast<float>(tag);
      for (auto b : rm.weights.w1_packed()) ok = ok && b == tag;
      for (auto b : rm.weights.b1()) ok = ok && b == static_cast<std::int8_t>(tag % 100);
      for (auto w : rm.weights.w2()) ok = ok && w == static_cast<float>(tag);
      if (!ok || rm.generation < last_gen) torn.fetch_add(1);
      last_gen = rm.generation;
      reads.fetch_add(1, std::memory_order_relaxed);
      std::this_thread::yield();
    }
  });
  for (int i = 0; i < 2000; ++i) {
    bank.swap_slot(SlotIndex{1}, tagged(static_cast<std::uint8_t>(2 + i % 200)));
    if (i % 16 == 0) std::this_thread::yield();
  }
  while (reads.load() < 1000) std::this_thread::yield();
  stop.store(true);
  reader.join();
  EXPECT_EQ(torn.load(), 0u);
  EXPECT_EQ(bank.generation(), 2000u);
  EXPECT_EQ(bank.fetch(SlotIndex{0}).weights, tagged(0));
}
