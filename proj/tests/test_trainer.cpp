#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "slotpath/bytes.hpp"
#include "slotpath/trainer.hpp"
#include "test_support.hpp"

using namespace slotpath;
using slotpath::testing::TempDir;

namespace {

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

EvalMetrics oracle_metrics(const MajorityBitOracle& oracle, std::span<const Sample> samples) {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& s : samples) {
    const bool predicted = oracle.predict_malicious(s.payload);
    const bool actual = s.label == Label::Malicious;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && !actual) ++tn;
    if (!predicted && actual) ++fn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

ModelWeights constant_model(float b2) {
  const ModelShape shape{kPayloadBits, 1};
  return ModelWeights(shape, std::vector<std::uint8_t>(shape.row_bytes(), 0), {0}, {0.0f}, b2);
}

}  // namespace

TEST(Generator, IsDeterministic) {
  DatasetParams p;
  p.seed = 1;
  p.samples = 1000;
  const auto a = generate_dataset(p);
  const auto b = generate_dataset(p);
  EXPECT_EQ(a.samples, b.samples);
  TempDir dir;
  write_dataset(dir / "a.bin", a.samples);
  write_dataset(dir / "b.bin", b.samples);
  EXPECT_EQ(read_file(dir / "a.bin"), read_file(dir / "b.bin"));
  EXPECT_EQ(std::filesystem::file_size(dir / "a.bin"), 8u + 1000u * 1025u);
  EXPECT_EQ(read_dataset(dir / "a.bin"), a.samples);

  p.seed = 2;
  EXPECT_NE(generate_dataset(p).samples, a.samples);
}

TEST(Generator, BothClassesPresentAndPriorRespected) {
  DatasetParams p;
  p.samples = 400;
  p.malicious_prior = 0.25;
  const auto ds = generate_dataset(p);
  const auto malicious = std::count_if(ds.samples.begin(), ds.samples.end(),
                                       [](const Sample& s) { return s.label == Label::Malicious; });
  EXPECT_EQ(malicious, 100);

  p.malicious_prior = 0.001;
  const auto edge = generate_dataset(p);
  EXPECT_TRUE(std::any_of(edge.samples.begin(), edge.samples.end(),
                          [](const Sample& s) { return s.label == Label::Malicious; }));
}

TEST(Generator, RejectsBadParameters) {
  DatasetParams p;
  p.bias = 0.0;
  EXPECT_EQ(error_of([&] { generate_dataset(p); }), Errc::DegenerateParams);
  p.bias = 0.6;
  EXPECT_EQ(error_of([&] { generate_dataset(p); }), Errc::InvalidArgument);
  p.bias = 0.01;
  p.malicious_prior = 0.0;
  EXPECT_EQ(error_of([&] { generate_dataset(p); }), Errc::InvalidArgument);
  p.malicious_prior = 0.5;
  p.samples = 1;
  EXPECT_EQ(error_of([&] { generate_dataset(p); }), Errc::InvalidArgument);
}

TEST(Oracle, DefaultBiasIsWellSeparated) {
  const auto ds = generate_dataset(DatasetParams{});
  const MajorityBitOracle oracle(ds);
  EXPECT_EQ(oracle.informative_positions(), kPayloadBits);
  EXPECT_GT(oracle_metrics(oracle, ds.samples).f1, 0.9);
}

TEST(Oracle, ZeroBiasIsChance) {
  DatasetParams p;
  p.bias = 0.0;
  p.require_separable = false;
  p.samples = 2000;
  const auto ds = generate_dataset(p);
  const MajorityBitOracle oracle(ds);
  EXPECT_NEAR(oracle_metrics(oracle, ds.samples).accuracy, 0.5, 0.05);
}

TEST(Oracle, SingleUnitNetworkReproducesOracleCounts) {
  DatasetParams p;
  p.samples = 600;
  p.bias = 0.005;  // weak enough that the oracle makes mistakes
  const auto ds = generate_dataset(p);
  const MajorityBitOracle oracle(ds);
  const auto net = oracle.as_single_unit_model();
  EXPECT_EQ(net.shape(), (ModelShape{kPayloadBits, 1}));
  const auto expected = oracle_metrics(oracle, ds.samples);
  const auto got = evaluate(net, ds.samples);
  EXPECT_EQ(got.tp, expected.tp);
  EXPECT_EQ(got.fp, expected.fp);
  EXPECT_EQ(got.tn, expected.tn);
  EXPECT_EQ(got.fn, expected.fn);
  EXPECT_GT(expected.fp + expected.fn, 0u);
  EXPECT_EQ(evaluate(net, ds.samples, InferencePath::Fast).tp, got.tp);
}

TEST(Metrics, Identities) {
  const auto m = metrics_from_counts(30, 10, 50, 20);
  EXPECT_DOUBLE_EQ(m.precision, 30.0 / 40.0);
  EXPECT_DOUBLE_EQ(m.recall, 30.0 / 50.0);
  EXPECT_DOUBLE_EQ(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall));
  EXPECT_DOUBLE_EQ(m.accuracy, 80.0 / 110.0);
  const auto z = metrics_from_counts(0, 0, 10, 5);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);
}

TEST(Metrics, DegenerateClassifiers) {
  DatasetParams p;
  p.samples = 200;
  p.malicious_prior = 0.3;
  const auto ds = generate_dataset(p);
  const auto always = evaluate(constant_model(1.0f), ds.samples);
  EXPECT_EQ(always.recall, 1.0);
  EXPECT_DOUBLE_EQ(always.precision, 0.3);
  const auto never = evaluate(constant_model(-1.0f), ds.samples);
  EXPECT_EQ(never.recall, 0.0);
  EXPECT_EQ(never.precision, 0.0);
  EXPECT_EQ(never.tp + never.fn, 60u);
}

TEST(Split, IsDisjointAndComplete) {
  DatasetParams p;
  p.samples = 100;
  const auto ds = generate_dataset(p);
  const auto [train, val] = split_dataset(ds.samples, 0.25, 3);
  EXPECT_EQ(train.size(), 75u);
  EXPECT_EQ(val.size(), 25u);
  for (const auto& v : val) {
    EXPECT_EQ(std::count(train.begin(), train.end(), v), 0);
  }
}

TEST(Trainer, IsDeterministicAndExportsExactly) {
  DatasetParams p;
  p.samples = 300;
  const auto ds = generate_dataset(p);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto a = train_bnn(ds, cfg);
  const auto b = train_bnn(ds, cfg);
  EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
  EXPECT_EQ(a.selected_epoch, b.selected_epoch);
  ASSERT_EQ(a.history.size(), 2u);

  TempDir dir;
  save_model(a.model, dir / "m.bin");
  const auto loaded = load_model(dir / "m.bin");
  const auto [train, val] = split_dataset(ds.samples, cfg.validation_fraction, cfg.seed);
  const auto in_memory = evaluate(a.model, val);
  const auto from_disk = evaluate(loaded, val);
  EXPECT_EQ(in_memory.tp, from_disk.tp);
  EXPECT_EQ(in_memory.fp, from_disk.fp);
  EXPECT_EQ(in_memory.tn, from_disk.tn);
  EXPECT_EQ(in_memory.fn, from_disk.fn);
  // The reported validation metrics are those of the exported model.
  EXPECT_EQ(in_memory.tp, a.validation.tp);
  EXPECT_EQ(in_memory.fp, a.validation.fp);
  EXPECT_EQ(a.history[a.selected_epoch].validation.f1, a.validation.f1);
}

TEST(Trainer, LearnsSparseStronglyBiasedConcept) {
  DatasetParams p;
  p.seed = 21;
  p.samples = 800;
  p.bias = 0.3;
  p.informative_fraction = 0.05;
  const auto ds = generate_dataset(p);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.selection_metric = SelectionMetric::Precision;
  const auto result = train_bnn(ds, cfg);
  EXPECT_GT(result.validation.f1, 0.95);
}

TEST(Trainer, ClassWeightShiftsRecallAndPrecision) {
  const auto ds = generate_dataset(DatasetParams{});
  TrainConfig high;
  high.pos_weight = 4.0;
  high.selection_metric = SelectionMetric::Recall;
  TrainConfig low;
  low.pos_weight = 0.5;
  low.selection_metric = SelectionMetric::Precision;
  const auto a = train_bnn(ds, high);
  const auto b = train_bnn(ds, low);
  EXPECT_GE(a.validation.recall, b.validation.recall);
  EXPECT_GE(b.validation.precision, a.validation.precision);
}

TEST(Trainer, RejectsInvalidInput) {
  DatasetParams p;
  p.samples = 50;
  const auto ds = generate_dataset(p);
  TrainConfig cfg;
  cfg.pos_weight = 0.0;
  EXPECT_EQ(error_of([&] { train_bnn(ds, cfg); }), Errc::InvalidArgument);

  std::vector<Sample> one_class(ds.samples.begin(), ds.samples.end());
  for (auto& s : one_class) s.label = Label::Benign;
  EXPECT_EQ(error_of([&] { train_bnn(one_class, one_class, TrainConfig{}); }), Errc::InvalidArgument);
}

TEST(Trainer, SelectionMetricParsing) {
  EXPECT_EQ(parse_selection_metric("recall"), SelectionMetric::Recall);
  EXPECT_EQ(parse_selection_metric("precision"), SelectionMetric::Precision);
  EXPECT_EQ(error_of([] { parse_selection_metric("f1"); }), Errc::InvalidArgument);
}
