#pragma once

#include <cstddef>
#include <cstdint>
#include <future>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kpaction/detail/numeric_text.hpp"
#include "kpaction/error.hpp"
#include "kpaction/keypoints.hpp"
#include "kpaction/neural/adam.hpp"
#include "kpaction/neural/model.hpp"
#include "kpaction/rng.hpp"
#include "kpaction/train_eval/metrics.hpp"

namespace kpaction {

/// Architecture choice. Empty unit lists fall back to the defaults of `kind`.
struct ArchSpec {
  neural::ModelKind kind = neural::ModelKind::lstm_classifier;
  std::vector<std::size_t> recurrent_units;
  std::vector<std::size_t> hidden_units;
  neural::Activation hidden_activation = neural::Activation::relu;
  neural::PoolKind pool = neural::PoolKind::mean;

  neural::ArchConfig resolve(std::size_t input_dim, std::size_t window, std::size_t classes) const {
    auto a = kind == neural::ModelKind::lstm_classifier ? neural::ArchConfig::lstm_default(input_dim, window, classes)
                                                        : neural::ArchConfig::mlp_default(input_dim, window, classes);
    if (kind == neural::ModelKind::lstm_classifier && !recurrent_units.empty()) a.recurrent_units = recurrent_units;
    if (!hidden_units.empty()) a.hidden_units = hidden_units;
    a.hidden_activation = hidden_activation;
    a.pool = pool;
    return a;
  }
};

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ArchSpec arch;
  double train_fraction = 0.7;
  std::optional<std::size_t> early_stop_patience;
  /// Subtract the training split's per-feature mean from every input.
  bool center_inputs = true;

  void validate() const {
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("train_fraction must lie in (0, 1)");
    if (early_stop_patience && *early_stop_patience < 1) throw ContractError("early_stop_patience must be >= 1");
    neural::AdamState<double> probe{learning_rate, beta1, beta2, epsilon, 0, {}, {}};
    probe.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct MetricsHistory {
  std::vector<EpochRecord> records;

  bool operator==(const MetricsHistory&) const = default;

  std::string to_csv() const {
    std::string out = "epoch,train_loss,train_acc,test_acc\n";
    for (const auto& r : records) {
      out += std::to_string(r.epoch);
      out += ',';
      detail::append_number(out, r.train_loss);
      out += ',';
      detail::append_number(out, r.train_acc);
      out += ',';
      detail::append_number(out, r.test_acc);
      out += '\n';
    }
    return out;
  }
};

/// Network plus the metadata needed to interpret its inputs and outputs.
template <class T>
struct TrainedModel {
  neural::Model<T> net;
  LandmarkLayout layout;
  std::vector<std::string> classes;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;

  bool operator==(const TrainedModel&) const = default;
};

template <class T>
struct TrainResult {
  TrainedModel<T> model;
  MetricsHistory history;
  EvalReport test_report;
};

namespace detail {

template <class T>
struct Batch {
  std::vector<std::vector<T>> inputs;
  std::vector<std::size_t> labels;
  std::size_t steps = 0;
};

template <class T>
Batch<T> to_batch(const Dataset& ds) {
  Batch<T> b;
  b.steps = ds.window();
  b.inputs.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    b.inputs.push_back(neural::window_buffer<T>(ds.sequences[i].frames));
    b.labels.push_back(ds.label_of(i));
  }
  return b;
}

template <class T>
std::vector<std::size_t> predict_all(const neural::Model<T>& m, const Batch<T>& b) {
  std::vector<std::size_t> preds;
  preds.reserve(b.inputs.size());
  for (const auto& x : b.inputs) {
    const auto probs = neural::model_forward(m, neural::view_of(x, b.steps));
    preds.push_back(neural::argmax(std::span<const T>(probs)));
  }
  return preds;
}

/// Per-feature mean over every frame of every sequence, accumulated in
/// double in dataset order.
template <class T>
std::vector<T> feature_means(const Dataset& ds) {
  std::vector<double> sum(ds.feature_dim(), 0.0);
  std::size_t frames = 0;
  for (const auto& s : ds.sequences) {
    for (const auto& f : s.frames) {
      for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += f.features[d];
      ++frames;
    }
  }
  std::vector<T> out(sum.size());
  for (std::size_t d = 0; d < sum.size(); ++d) out[d] = static_cast<T>(sum[d] / static_cast<double>(frames));
  return out;
}

inline void check_dataset_shape(const neural::ArchConfig& arch, const Dataset& ds) {
  if (ds.feature_dim() != arch.input_dim || ds.window() != arch.window) {
    throw ShapeError("model expects windows of " + std::to_string(arch.window) + " frames x " + std::to_string(arch.input_dim) +
                     " features, dataset has " + std::to_string(ds.window()) + " frames x " + std::to_string(ds.feature_dim()) +
                     " features");
  }
  if (ds.classes.size() != arch.class_count) {
    throw ShapeError("model has " + std::to_string(arch.class_count) + " classes, dataset has " + std::to_string(ds.classes.size()));
  }
}

}  // namespace detail

template <class T>
EvalReport evaluate(const neural::Model<T>& m, const Dataset& ds) {
  if (ds.empty()) throw ContractError("cannot evaluate on an empty dataset");
  detail::check_dataset_shape(m.arch, ds);
  const auto batch = detail::to_batch<T>(ds);
  const auto preds = detail::predict_all(m, batch);
  ConfusionMatrix cm(ds.classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(batch.labels[i], preds[i]);
  return EvalReport::from_confusion(std::move(cm));
}

template <class T>
EvalReport evaluate(const TrainedModel<T>& m, const Dataset& ds) {
  return evaluate(m.net, ds);
}

/// Stratified split, per-epoch seeded shuffle, mean-gradient minibatches,
/// Adam. Gradients of a batch are summed in index order, so the result is
/// bit-reproducible for a given (dataset, config).
template <class T>
TrainResult<T> train(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.empty()) throw ContractError("cannot train on an empty dataset");
  ds.validate();
  auto [train_set, test_set] = split_dataset(ds, cfg.train_fraction, cfg.seed);
  if (train_set.empty() || test_set.empty()) throw ContractError("train/test split left one side empty");

  const auto arch = cfg.arch.resolve(ds.feature_dim(), ds.window(), ds.classes.size());
  TrainResult<T> result;
  result.model.net = neural::init_params<T>(arch, derive_seed(cfg.seed, 1));
  result.model.layout = ds.layout();
  result.model.classes = ds.classes;
  result.model.seed = cfg.seed;
  result.model.train_fraction = cfg.train_fraction;
  auto& model = result.model.net;
  if (cfg.center_inputs) model.input_offset = detail::feature_means<T>(train_set);

  const auto train_batch = detail::to_batch<T>(train_set);
  const auto test_batch = detail::to_batch<T>(test_set);
  const std::size_t n = train_batch.inputs.size();

  neural::AdamState<T> opt;
  opt.learning_rate = static_cast<T>(cfg.learning_rate);
  opt.beta1 = static_cast<T>(cfg.beta1);
  opt.beta2 = static_cast<T>(cfg.beta2);
  opt.epsilon = static_cast<T>(cfg.epsilon);

  auto grads = neural::Model<T>::zeros(arch);
  std::vector<std::size_t> order(n);
  double best_test = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(derive_seed(derive_seed(cfg.seed, 2), epoch));
    shuffle_in_place(order, rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      for (auto span : grads.parameters()) std::fill(span.begin(), span.end(), T(0));
      const T scale = T(1) / static_cast<T>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        std::size_t predicted = 0;
        loss_sum += static_cast<double>(neural::backward_accumulate(
            model, neural::view_of(train_batch.inputs[i], train_batch.steps), train_batch.labels[i], grads, scale, &predicted));
        if (predicted == train_batch.labels[i]) ++correct;
      }
      const auto g = grads.parameters();
      std::vector<std::span<const T>> cg(g.begin(), g.end());
      neural::adam_step(opt, model.parameters(), cg);
    }

    const auto test_preds = detail::predict_all(model, test_batch);
    std::size_t test_correct = 0;
    for (std::size_t i = 0; i < test_preds.size(); ++i) test_correct += test_preds[i] == test_batch.labels[i];

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    rec.test_acc = static_cast<double>(test_correct) / static_cast<double>(test_preds.size());
    result.history.records.push_back(rec);

    if (cfg.early_stop_patience) {
      if (rec.test_acc > best_test) {
        best_test = rec.test_acc;
        since_best = 0;
      } else if (++since_best >= *cfg.early_stop_patience) {
        break;
      }
    }
  }
  result.test_report = evaluate(model, test_set);
  return result;
}

/// One grid point: any field left empty keeps the base config's value.
struct ConfigOverride {
  std::string name;
  std::optional<neural::ModelKind> kind;
  std::optional<neural::Activation> hidden_activation;
  std::optional<double> train_fraction;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  /// Pins the run seed instead of deriving it from the run index.
  std::optional<std::uint64_t> seed;
};

/// Run `index` of a sweep: overrides applied, seed = base.seed + index
/// unless the override pins one.
inline TrainConfig apply_override(const TrainConfig& base, const ConfigOverride& o, std::size_t index) {
  TrainConfig c = base;
  if (o.kind && *o.kind != c.arch.kind) {
    c.arch.kind = *o.kind;
    c.arch.recurrent_units.clear();
    c.arch.hidden_units.clear();
  }
  if (o.hidden_activation) c.arch.hidden_activation = *o.hidden_activation;
  if (o.train_fraction) c.train_fraction = *o.train_fraction;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  c.seed = o.seed ? *o.seed : base.seed + index;
  return c;
}

/// Five runs: {relu, tanh} hidden activation x {60/40, 70/30} split, then the
/// final relu / softmax / 70-30 configuration.
inline std::vector<ConfigOverride> default_sweep_grid() {
  using neural::Activation;
  return {
      {"tanh_60_40", std::nullopt, Activation::tanh, 0.6, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"relu_60_40", std::nullopt, Activation::relu, 0.6, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"tanh_70_30", std::nullopt, Activation::tanh, 0.7, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"relu_70_30", std::nullopt, Activation::relu, 0.7, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"final_relu_softmax_70_30", std::nullopt, Activation::relu, 0.7, std::nullopt, std::nullopt, std::nullopt, std::nullopt},
  };
}

struct SweepResult {
  std::string name;
  TrainConfig config;
  EvalReport report;
  MetricsHistory history;
};

/// Trains one model per grid point. Results come back in grid order; with
/// `parallel` the runs execute concurrently (they share nothing).
template <class T>
std::vector<SweepResult> sweep(const Dataset& ds, const TrainConfig& base, const std::vector<ConfigOverride>& grid,
                               bool parallel = false) {
  if (grid.empty()) throw ContractError("sweep grid is empty");
  auto run = [&ds](ConfigOverride o, TrainConfig c) {
    auto r = train<T>(ds, c);
    return SweepResult{o.name, c, std::move(r.test_report), std::move(r.history)};
  };
  std::vector<SweepResult> out;
  if (!parallel) {
    for (std::size_t i = 0; i < grid.size(); ++i) out.push_back(run(grid[i], apply_override(base, grid[i], i)));
    return out;
  }
  std::vector<std::future<SweepResult>> pending;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    pending.push_back(std::async(std::launch::async, run, grid[i], apply_override(base, grid[i], i)));
  }
  for (auto& f : pending) out.push_back(f.get());
  return out;
}

}  // namespace kpaction
