#include "slotpath/model_bank.hpp"

#include <string>

namespace slotpath {
namespace {

std::string describe(const ModelShape& s) {
  return "(d=" + std::to_string(s.input_bits) + ", h=" + std::to_string(s.hidden_width) + ")";
}

}  // namespace

ModelBank::ModelBank(std::vector<ModelWeights> models) {
  if (models.empty()) throw Error(Errc::EmptyBank, "model bank needs at least one slot");
  shape_ = models.front().shape();
  for (std::size_t k = 1; k < models.size(); ++k) {
    if (models[k].shape() != shape_) {
      throw Error(Errc::DimensionMismatch, "slot " + std::to_string(k) + " has shape " +
                                               describe(models[k].shape()) + ", slot 0 has " +
                                               describe(shape_));
    }
  }
  count_ = models.size();
  slots_ = std::make_unique<std::atomic<const ResidentModel*>[]>(count_);
  storage_.reserve(count_);
  for (std::size_t k = 0; k < count_; ++k) {
    storage_.push_back(std::make_unique<const ResidentModel>(ResidentModel{std::move(models[k]), 0}));
    slots_[k].store(storage_.back().get(), std::memory_order_release);
  }
}

SlotIndex ModelBank::resolve(const Reg0Metadata& meta) const {
  if (auto k = try_resolve(meta.slot_id)) return *k;
  throw Error(Errc::SlotOutOfRange, "slot id " + std::to_string(meta.slot_id) +
                                        " outside bank of " + std::to_string(count_));
}

void ModelBank::swap_slot(SlotIndex k, ModelWeights next) {
  if (k.value >= count_) {
    throw Error(Errc::SlotOutOfRange, "slot " + std::to_string(k.value) + " outside bank of " +
                                          std::to_string(count_));
  }
  if (next.shape() != shape_) {
    throw Error(Errc::DimensionMismatch,
                "replacement " + describe(next.shape()) + " does not fit bank " + describe(shape_));
  }
  std::lock_guard lock(writer_);
  const auto gen = generation_.load(std::memory_order_relaxed) + 1;
  storage_.push_back(std::make_unique<const ResidentModel>(ResidentModel{std::move(next), gen}));
  slots_[k.value].store(storage_.back().get(), std::memory_order_release);
  generation_.store(gen, std::memory_order_release);
}

std::size_t ModelBank::retained_models() const {
  std::lock_guard lock(writer_);
  return storage_.size();
}

ModelBank load_bank(std::span<const std::filesystem::path> paths, std::size_t input_bits) {
  if (paths.empty()) throw Error(Errc::EmptyBank, "no weight files given");
  std::vector<ModelWeights> models;
  models.reserve(paths.size());
  for (const auto& p : paths) models.push_back(load_model(p, input_bits));
  return ModelBank(std::move(models));
}

}  // namespace slotpath
