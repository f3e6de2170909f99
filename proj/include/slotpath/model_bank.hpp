#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "slotpath/bnn.hpp"
#include "slotpath/packet_format.hpp"

namespace slotpath {

struct SlotIndex {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const SlotIndex&, const SlotIndex&) = default;
};

/// Immutable contents of one slot. A swap installs a new object; readers keep
/// whichever object they loaded, so a packet never sees a mix of two versions.
struct ResidentModel {
  ModelWeights weights;
  std::uint64_t generation = 0;  // bank generation at install time
};

/// Fixed-capacity set of resident models sharing one (d, h) shape.
///
/// Readers (resolve + fetch) are wait-free: a bounds check and one acquire
/// load. swap_slot is serialized by a writer mutex and publishes with a
/// release store. Replaced models are retained until the bank is destroyed,
/// which keeps every reference returned by fetch() valid for the bank's life.
class ModelBank {
 public:
  /// Throws Error(EmptyBank) or Error(DimensionMismatch).
  explicit ModelBank(std::vector<ModelWeights> models);

  ModelBank(const ModelBank&) = delete;
  ModelBank& operator=(const ModelBank&) = delete;

  std::size_t size() const noexcept { return count_; }
  const ModelShape& shape() const noexcept { return shape_; }
  std::uint64_t generation() const noexcept { return generation_.load(std::memory_order_acquire); }

  /// Sum of serialized slot sizes.
  std::uint64_t footprint_bytes() const noexcept {
    return static_cast<std::uint64_t>(count_) * shape_.serialized_bytes();
  }

  std::optional<SlotIndex> try_resolve(std::uint32_t slot_id) const noexcept {
    if (slot_id < count_) return SlotIndex{slot_id};
    return std::nullopt;
  }
  /// Throws Error(SlotOutOfRange) when meta.slot_id >= size().
  SlotIndex resolve(const Reg0Metadata& meta) const;

  /// `k` must come from try_resolve/resolve on this bank.
  const ResidentModel& fetch(SlotIndex k) const noexcept {
    return *slots_[k.value].load(std::memory_order_acquire);
  }

  /// Throws Error(SlotOutOfRange) or Error(DimensionMismatch).
  void swap_slot(SlotIndex k, ModelWeights next);

  /// Number of retained model objects (live slots plus replaced ones).
  std::size_t retained_models() const;

 private:
  ModelShape shape_;
  std::size_t count_ = 0;
  std::unique_ptr<std::atomic<const ResidentModel*>[]> slots_;
  std::atomic<std::uint64_t> generation_{0};

  mutable std::mutex writer_;
  std::vector<std::unique_ptr<const ResidentModel>> storage_;
};

/// Loads one weight file per slot, in argument order. Hidden width is taken
/// from each file's length; all files must agree.
ModelBank load_bank(std::span<const std::filesystem::path> paths,
                    std::size_t input_bits = kPayloadBits);

}  // namespace slotpath
