#include "slotpath/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "slotpath/bytes.hpp"
#include "slotpath/pipeline.hpp"

namespace slotpath {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidArgument, what);
}

std::uint32_t probability_threshold(double p) {
  const double scaled = std::clamp(p, 0.0, 1.0) * 4294967296.0;
  return scaled >= 4294967295.0 ? 0xffffffffu : static_cast<std::uint32_t>(scaled);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct Adam {
  explicit Adam(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

  void step(std::span<float> params, std::span<const float> grad, double lr, std::uint64_t t) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const float step_size = static_cast<float>(lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = static_cast<float>(beta1) * m[i] + static_cast<float>(1 - beta1) * grad[i];
      v[i] = static_cast<float>(beta2) * v[i] + static_cast<float>(1 - beta2) * grad[i] * grad[i];
      params[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + static_cast<float>(eps));
    }
  }

  std::vector<float> m, v;
};

// Real-valued shadow parameters; the forward pass always uses the exported
// (binarized / rounded) view of them.
struct Shadow {
  ModelShape shape;
  std::vector<float> w1, b1, w2;
  float b2 = 0.0f;

  std::int8_t b1_quantized(std::size_t n) const {
    return static_cast<std::int8_t>(std::clamp(std::lround(b1[n]), -128L, 127L));
  }

  ModelWeights export_model() const {
    std::vector<std::uint8_t> packed(shape.hidden_width * shape.row_bytes(), 0);
    for (std::size_t i = 0; i < w1.size(); ++i) {
      if (w1[i] >= 0.0f) packed[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7u));
    }
    std::vector<std::int8_t> qb1(shape.hidden_width);
    for (std::size_t n = 0; n < shape.hidden_width; ++n) qb1[n] = b1_quantized(n);
    return ModelWeights(shape, std::move(packed), std::move(qb1), w2, b2);
  }
};

bool better(const EvalMetrics& a, const EvalMetrics& b, SelectionMetric metric) {
  const double ka = metric == SelectionMetric::Recall ? a.recall : a.precision;
  const double kb = metric == SelectionMetric::Recall ? b.recall : b.precision;
  if (ka != kb) return ka > kb;
  return a.f1 > b.f1;
}

}  // namespace

SyntheticDataset generate_dataset(const DatasetParams& params) {
  require(params.samples >= 2, "dataset needs at least 2 samples");
  require(params.malicious_prior > 0.0 && params.malicious_prior < 1.0,
          "malicious_prior must lie in (0, 1)");
  require(params.bias >= 0.0 && params.bias <= 0.5, "bias must lie in [0, 0.5]");
  require(params.informative_fraction > 0.0 && params.informative_fraction <= 1.0,
          "informative_fraction must lie in (0, 1]");
  if (params.bias == 0.0 && params.require_separable) {
    throw Error(Errc::DegenerateParams, "bias 0 makes both classes identical");
  }

  SyntheticDataset ds;
  ds.params = params;
  ds.p_benign.assign(kPayloadBits, 0.5);
  ds.p_malicious.assign(kPayloadBits, 0.5);

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ds.direction.assign(kPayloadBits, 0);
  for (std::size_t j = 0; j < kPayloadBits; ++j) {
    const std::int8_t dir = (rng() & 1u) != 0 ? 1 : -1;
    const bool informative = params.informative_fraction >= 1.0 || unit(rng) < params.informative_fraction;
    if (!informative) continue;
    ds.direction[j] = dir;
    ds.p_malicious[j] = 0.5 + dir * params.bias;
    ds.p_benign[j] = 0.5 - dir * params.bias;
  }

  std::vector<std::uint32_t> thr_benign(kPayloadBits), thr_malicious(kPayloadBits);
  for (std::size_t j = 0; j < kPayloadBits; ++j) {
    thr_benign[j] = probability_threshold(ds.p_benign[j]);
    thr_malicious[j] = probability_threshold(ds.p_malicious[j]);
  }

  const auto n = params.samples;
  auto n_mal = static_cast<std::size_t>(std::llround(params.malicious_prior * static_cast<double>(n)));
  n_mal = std::clamp<std::size_t>(n_mal, 1, n - 1);
  std::vector<Label> labels(n, Label::Benign);
  std::fill_n(labels.begin(), n_mal, Label::Malicious);
  std::shuffle(labels.begin(), labels.end(), rng);

  ds.samples.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto& sample = ds.samples[s];
    sample.label = labels[s];
    const auto& thr = sample.label == Label::Malicious ? thr_malicious : thr_benign;
    for (std::size_t j = 0; j < kPayloadBits; j += 2) {
      const std::uint64_t r = rng();
      const auto lo = static_cast<std::uint32_t>(r);
      const auto hi = static_cast<std::uint32_t>(r >> 32);
      if (lo < thr[j]) sample.payload[j >> 3] |= static_cast<std::uint8_t>(1u << (j & 7u));
      if (hi < thr[j + 1]) sample.payload[(j + 1) >> 3] |= static_cast<std::uint8_t>(1u << ((j + 1) & 7u));
    }
  }
  return ds;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::span<const Sample> samples,
                                                                  double validation_fraction,
                                                                  std::uint64_t seed) {
  require(validation_fraction > 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(samples.size())));
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? out.second : out.first).push_back(samples[order[i]]);
  }
  return out;
}

MajorityBitOracle::MajorityBitOracle(const SyntheticDataset& dataset)
    : favoured_(kPayloadBits, 0) {
  for (std::size_t j = 0; j < kPayloadBits; ++j) {
    if (dataset.direction[j] == 0) continue;
    informative_.push_back(static_cast<std::uint32_t>(j));
    favoured_[j] = dataset.direction[j] > 0 ? 1 : 0;
  }
}

bool MajorityBitOracle::predict_malicious(
    std::span<const std::uint8_t, kPayloadBytes> payload) const noexcept {
  std::size_t agree = 0;
  for (const auto j : informative_) {
    const unsigned bit = (payload[j >> 3] >> (j & 7u)) & 1u;
    if (bit == favoured_[j]) ++agree;
  }
  return 2 * agree >= informative_.size();
}

ModelWeights MajorityBitOracle::as_single_unit_model() const {
  require(informative_.size() == kPayloadBits,
          "single-unit form needs every position to be informative");
  std::vector<std::uint8_t> w1(kPayloadBytes, 0);
  for (std::size_t j = 0; j < kPayloadBits; ++j) {
    if (favoured_[j] != 0) w1[j >> 3] |= static_cast<std::uint8_t>(1u << (j & 7u));
  }
  return ModelWeights(ModelShape{kPayloadBits, 1}, std::move(w1), {0}, {1.0f}, 0.0f);
}

std::string_view to_string(SelectionMetric m) noexcept {
  return m == SelectionMetric::Recall ? "recall" : "precision";
}

SelectionMetric parse_selection_metric(std::string_view text) {
  if (text == "recall") return SelectionMetric::Recall;
  if (text == "precision") return SelectionMetric::Precision;
  throw Error(Errc::InvalidArgument, "selection metric must be recall or precision");
}

EvalMetrics metrics_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn,
                                std::uint64_t fn) {
  EvalMetrics m{tp, fp, tn, fn};
  auto ratio = [](std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = ratio(tp + tn, tp + fp + tn + fn);
  return m;
}

EvalMetrics evaluate(const ModelWeights& model, std::span<const Sample> samples, InferencePath path) {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  const Reg0Metadata meta{};
  for (const auto& s : samples) {
    const PayloadView x(s.payload);
    const Score score = path == InferencePath::Reference ? infer_reference(model, x) : infer_fast(model, x);
    const bool predicted = decide_action(meta, score).verdict == Verdict::Drop;
    const bool actual = s.label == Label::Malicious;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

TrainResult train_bnn(std::span<const Sample> train, std::span<const Sample> validation,
                      const TrainConfig& config) {
  require(config.pos_weight > 0.0, "pos_weight must be positive");
  require(config.epochs > 0 && config.batch_size > 0 && config.hidden_width > 0,
          "epochs, batch_size and hidden_width must be positive");
  require(!validation.empty(), "validation set is empty");
  const auto has = [](std::span<const Sample> s, Label l) {
    return std::any_of(s.begin(), s.end(), [l](const Sample& x) { return x.label == l; });
  };
  require(has(train, Label::Benign) && has(train, Label::Malicious),
          "training set must contain both classes");

  const ModelShape shape{kPayloadBits, config.hidden_width};
  const std::size_t d = shape.input_bits;
  const std::size_t h = shape.hidden_width;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<float> init_w(-0.1f, 0.1f);
  Shadow p{shape, std::vector<float>(h * d), std::vector<float>(h, 0.0f), std::vector<float>(h), 0.0f};
  for (auto& w : p.w1) w = init_w(rng);
  for (auto& w : p.w2) w = init_w(rng);

  Adam adam_w1(h * d), adam_b1(h), adam_w2(h), adam_b2(1);
  std::vector<float> g_w1(h * d), g_b1(h), g_w2(h), g_b2(1);
  std::vector<float> xpm(d);
  std::vector<std::uint8_t> packed(h * shape.row_bytes());
  std::vector<double> pre(h), hid(h);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::optional<TrainResult> best;
  std::vector<EpochLog> history;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      std::fill(packed.begin(), packed.end(), 0);
      for (std::size_t i = 0; i < p.w1.size(); ++i) {
        if (p.w1[i] >= 0.0f) packed[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7u));
      }
      std::fill(g_w1.begin(), g_w1.end(), 0.0f);
      std::fill(g_b1.begin(), g_b1.end(), 0.0f);
      std::fill(g_w2.begin(), g_w2.end(), 0.0f);
      g_b2[0] = 0.0f;

      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& s = train[order[b]];
        const auto* x = s.payload.data();
        for (std::size_t j = 0; j < d; ++j) xpm[j] = ((x[j >> 3] >> (j & 7u)) & 1u) != 0 ? 1.0f : -1.0f;

        double y = 0.0;
        for (std::size_t n = 0; n < h; ++n) {
          std::int64_t miss = 0;
          const auto* row = packed.data() + n * shape.row_bytes();
          for (std::size_t i = 0; i < shape.row_bytes(); i += 8) {
            std::uint64_t a, c;
            std::memcpy(&a, row + i, 8);
            std::memcpy(&c, x + i, 8);
            miss += std::popcount(a ^ c);
          }
          pre[n] = static_cast<double>(static_cast<std::int64_t>(d) - 2 * miss + p.b1_quantized(n));
          hid[n] = pre[n] >= 0.0 ? 1.0 : -1.0;
          y += static_cast<double>(p.w2[n]) * hid[n];
        }
        y += static_cast<double>(p.b2);

        const bool positive = s.label == Label::Malicious;
        const double loss = positive ? config.pos_weight * softplus(-y) : softplus(y);
        const double g = positive ? -config.pos_weight * sigmoid(-y) : sigmoid(y);
        batch_loss += loss;

        g_b2[0] += static_cast<float>(g * inv_batch);
        for (std::size_t n = 0; n < h; ++n) {
          g_w2[n] += static_cast<float>(g * hid[n] * inv_batch);
          // Straight-through sign: pass the gradient inside |pre| <= d.
          if (std::abs(pre[n]) > static_cast<double>(d)) continue;
          const auto dpre = static_cast<float>(g * static_cast<double>(p.w2[n]) * inv_batch);
          g_b1[n] += dpre;
          float* grow = g_w1.data() + n * d;
          for (std::size_t j = 0; j < d; ++j) grow[j] += dpre * xpm[j];
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(Errc::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) +
                                             ", batch starting at " + std::to_string(start));
      }
      epoch_loss += batch_loss;

      ++step;
      adam_w1.step(p.w1, g_w1, config.learning_rate, step);
      adam_b1.step(p.b1, g_b1, config.bias_learning_rate, step);
      adam_w2.step(p.w2, g_w2, config.learning_rate, step);
      std::span<float> b2_span(&p.b2, 1);
      adam_b2.step(b2_span, g_b2, config.learning_rate, step);
      for (auto& w : p.w1) w = std::clamp(w, -1.0f, 1.0f);
      for (auto& b : p.b1) b = std::clamp(b, -128.0f, 127.0f);
    }

    ModelWeights exported = p.export_model();
    EpochLog log{epoch, epoch_loss / static_cast<double>(train.size()),
                 evaluate(exported, validation, InferencePath::Fast)};
    history.push_back(log);
    if (!best || better(log.validation, best->validation, config.selection_metric)) {
      best = TrainResult{std::move(exported), epoch, log.validation, {}};
    }
  }
  best->history = std::move(history);
  return std::move(*best);
}

TrainResult train_bnn(const SyntheticDataset& dataset, const TrainConfig& config) {
  auto [train, validation] = split_dataset(dataset.samples, config.validation_fraction, config.seed);
  return train_bnn(train, validation, config);
}

void write_dataset(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + samples.size() * (1 + kPayloadBytes));
  append_le64(out, samples.size());
  for (const auto& s : samples) {
    out.push_back(static_cast<std::uint8_t>(s.label));
    out.insert(out.end(), s.payload.begin(), s.payload.end());
  }
  write_file(path, out);
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8) throw Error(Errc::TruncatedFile, "dataset shorter than its count prefix");
  const auto count = load_le64(bytes.data());
  constexpr std::size_t record = 1 + kPayloadBytes;
  if (count > (bytes.size() - 8) / record || 8 + count * record != bytes.size()) {
    throw Error(Errc::TruncatedFile, "dataset declares " + std::to_string(count) +
                                         " records but holds " + std::to_string(bytes.size()) + " bytes");
  }
  std::vector<Sample> samples(count);
  const std::uint8_t* p = bytes.data() + 8;
  for (auto& s : samples) {
    if (*p > 1) throw Error(Errc::InvalidArgument, "dataset label must be 0 or 1");
    s.label = static_cast<Label>(*p);
    std::copy_n(p + 1, kPayloadBytes, s.payload.begin());
    p += record;
  }
  return samples;
}

}  // namespace slotpath
