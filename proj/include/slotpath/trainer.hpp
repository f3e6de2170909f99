#pragma once

// Desk-scale training of slot-differentiated models: a seeded synthetic
// traffic generator, a straight-through-estimator trainer with a weighted
// logistic loss, and checkpoint selection by recall or precision.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slotpath/bnn.hpp"
#include "slotpath/packet_format.hpp"

namespace slotpath {

enum class Label : std::uint8_t { Benign = 0, Malicious = 1 };

struct Sample {
  std::array<std::uint8_t, kPayloadBytes> payload{};
  Label label = Label::Benign;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Generator parameters. Every payload bit is Bernoulli: 0.5 + dir*bias for
/// malicious samples and 0.5 - dir*bias for benign ones on informative
/// positions, 0.5 elsewhere. `dir` is a seeded ±1 per position.
struct DatasetParams {
  std::uint64_t seed = 1;
  std::size_t samples = 1000;
  double malicious_prior = 0.5;
  double bias = 0.01;
  double informative_fraction = 1.0;
  bool require_separable = true;
};

struct SyntheticDataset {
  DatasetParams params;
  std::vector<double> p_benign;     // P(bit = 1 | benign), per position
  std::vector<double> p_malicious;  // P(bit = 1 | malicious), per position
  std::vector<std::int8_t> direction;  // +1/-1 on informative positions, 0 elsewhere
  std::vector<Sample> samples;
};

/// Throws Error(DegenerateParams) when bias is zero and separability is
/// required, Error(InvalidArgument) for out-of-range parameters.
SyntheticDataset generate_dataset(const DatasetParams& params);

/// Disjoint seeded partition into (train, validation).
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::span<const Sample> samples,
                                                                  double validation_fraction,
                                                                  std::uint64_t seed);

/// Predicts malicious when at least half of the informative positions carry
/// the malicious-favoured bit value.
class MajorityBitOracle {
 public:
  explicit MajorityBitOracle(const SyntheticDataset& dataset);

  bool predict_malicious(std::span<const std::uint8_t, kPayloadBytes> payload) const noexcept;
  std::size_t informative_positions() const noexcept { return informative_.size(); }

  /// The same rule as a one-hidden-unit network. Requires every position to
  /// be informative; throws Error(InvalidArgument) otherwise.
  ModelWeights as_single_unit_model() const;

 private:
  std::vector<std::uint32_t> informative_;
  std::vector<std::uint8_t> favoured_;  // malicious-favoured bit per position
};

enum class SelectionMetric { Recall, Precision };

std::string_view to_string(SelectionMetric m) noexcept;
SelectionMetric parse_selection_metric(std::string_view text);

struct TrainConfig {
  double pos_weight = 1.0;
  std::size_t epochs = 6;
  double learning_rate = 0.01;
  double bias_learning_rate = 0.5;  // for b1, which lives on the integer scale
  std::size_t batch_size = 32;
  std::size_t hidden_width = 32;
  std::uint64_t seed = 1;
  SelectionMetric selection_metric = SelectionMetric::Recall;
  double validation_fraction = 0.25;  // used by the single-dataset overload
};

struct EvalMetrics {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// P, R, F1 from counts with the 0/0 -> 0 convention.
EvalMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn);

enum class InferencePath { Reference, Fast };

/// Scores every sample and applies the default action threshold
/// (score > 0 means malicious).
EvalMetrics evaluate(const ModelWeights& model, std::span<const Sample> samples,
                     InferencePath path = InferencePath::Reference);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  EvalMetrics validation;
};

struct TrainResult {
  ModelWeights model;
  std::size_t selected_epoch = 0;
  EvalMetrics validation;
  std::vector<EpochLog> history;
};

/// Throws Error(NonFiniteLoss) with the epoch and batch, and
/// Error(InvalidArgument) when a class is missing or the config is invalid.
TrainResult train_bnn(std::span<const Sample> train, std::span<const Sample> validation,
                      const TrainConfig& config);
TrainResult train_bnn(const SyntheticDataset& dataset, const TrainConfig& config);

// Dataset file: u64 LE count, then count * (label byte, 1024 payload bytes).
void write_dataset(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

}  // namespace slotpath
