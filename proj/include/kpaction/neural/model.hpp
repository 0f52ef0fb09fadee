#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpaction/error.hpp"
#include "kpaction/keypoints.hpp"
#include "kpaction/neural/layers.hpp"
#include "kpaction/rng.hpp"

namespace kpaction::neural {

enum class ModelKind { lstm_classifier, mlp_baseline };
enum class PoolKind { mean, flatten };

inline std::string to_string(ModelKind k) { return k == ModelKind::lstm_classifier ? "lstm_classifier" : "mlp_baseline"; }
inline std::string to_string(PoolKind k) { return k == PoolKind::mean ? "mean" : "flatten"; }

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "lstm" || s == "lstm_classifier") return ModelKind::lstm_classifier;
  if (s == "mlp" || s == "mlp_baseline") return ModelKind::mlp_baseline;
  throw ContractError("unknown architecture '" + s + "' (expected lstm or mlp)");
}

inline PoolKind pool_kind_from_string(const std::string& s) {
  if (s == "mean") return PoolKind::mean;
  if (s == "flatten") return PoolKind::flatten;
  throw ContractError("unknown pooling '" + s + "' (expected mean or flatten)");
}

/// Layer sizes and shapes. The LSTM classifier runs its recurrent stack over
/// the window and feeds the last hidden state to the dense head; the MLP
/// baseline pools the window and runs only the dense stack.
struct ArchConfig {
  ModelKind kind = ModelKind::lstm_classifier;
  std::vector<std::size_t> recurrent_units{64, 32};
  std::vector<std::size_t> hidden_units{32};
  Activation hidden_activation = Activation::relu;
  PoolKind pool = PoolKind::mean;
  std::size_t input_dim = 0;
  std::size_t window = 0;
  std::size_t class_count = 2;

  bool operator==(const ArchConfig&) const = default;

  static ArchConfig lstm_default(std::size_t input_dim, std::size_t window, std::size_t classes) {
    ArchConfig a;
    a.input_dim = input_dim;
    a.window = window;
    a.class_count = classes;
    return a;
  }

  static ArchConfig mlp_default(std::size_t input_dim, std::size_t window, std::size_t classes) {
    ArchConfig a;
    a.kind = ModelKind::mlp_baseline;
    a.recurrent_units.clear();
    a.hidden_units = {64, 32};
    a.input_dim = input_dim;
    a.window = window;
    a.class_count = classes;
    return a;
  }

  void validate() const {
    if (input_dim == 0) throw ContractError("input_dim must be >= 1");
    if (window == 0) throw ContractError("window must be >= 1");
    if (class_count < 2) throw ContractError("class_count must be >= 2");
    if (kind == ModelKind::lstm_classifier && recurrent_units.empty()) throw ContractError("LSTM classifier needs at least one recurrent layer");
    if (kind == ModelKind::mlp_baseline && !recurrent_units.empty()) throw ContractError("MLP baseline has no recurrent layers");
    for (auto u : recurrent_units) {
      if (u == 0) throw ContractError("recurrent layer width must be >= 1");
    }
    for (auto u : hidden_units) {
      if (u == 0) throw ContractError("hidden layer width must be >= 1");
    }
  }

  /// Width of the vector entering the dense stack.
  std::size_t head_input_dim() const {
    if (kind == ModelKind::lstm_classifier) return recurrent_units.back();
    return pool == PoolKind::mean ? input_dim : input_dim * window;
  }
};

template <class T>
struct Model {
  ArchConfig arch;
  std::vector<LstmParams<T>> recurrent;
  std::vector<DenseParams<T>> dense;  // hidden layers, then the output layer
  /// Per-feature value subtracted from every input frame; empty = none. Not
  /// trained. For pooled models it is subtracted after pooling.
  std::vector<T> input_offset;

  bool operator==(const Model&) const = default;

  static Model zeros(const ArchConfig& arch) {
    arch.validate();
    Model m;
    m.arch = arch;
    std::size_t in = arch.input_dim;
    if (arch.kind == ModelKind::lstm_classifier) {
      for (auto units : arch.recurrent_units) {
        m.recurrent.emplace_back(in, units);
        in = units;
      }
    }
    in = arch.head_input_dim();
    for (auto units : arch.hidden_units) {
      m.dense.emplace_back(in, units);
      in = units;
    }
    m.dense.emplace_back(in, arch.class_count);
    return m;
  }

  DenseParams<T>& output_layer() { return dense.back(); }
  const DenseParams<T>& output_layer() const { return dense.back(); }

  std::vector<std::span<T>> parameters() {
    std::vector<std::span<T>> out;
    for (auto& l : recurrent) {
      out.emplace_back(l.w_input.data);
      out.emplace_back(l.w_hidden.data);
      out.emplace_back(l.bias);
    }
    for (auto& l : dense) {
      out.emplace_back(l.weights.data);
      out.emplace_back(l.bias);
    }
    return out;
  }

  std::vector<std::span<const T>> parameters() const {
    std::vector<std::span<const T>> out;
    for (auto& l : recurrent) {
      out.emplace_back(l.w_input.data);
      out.emplace_back(l.w_hidden.data);
      out.emplace_back(l.bias);
    }
    for (auto& l : dense) {
      out.emplace_back(l.weights.data);
      out.emplace_back(l.bias);
    }
    return out;
  }

  /// Names aligned with parameters().
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < recurrent.size(); ++i) {
      const auto p = "recurrent" + std::to_string(i);
      out.push_back(p + ".w_input");
      out.push_back(p + ".w_hidden");
      out.push_back(p + ".bias");
    }
    for (std::size_t i = 0; i < dense.size(); ++i) {
      const auto p = "dense" + std::to_string(i);
      out.push_back(p + ".weights");
      out.push_back(p + ".bias");
    }
    return out;
  }

  /// (rows, cols) per tensor, aligned with parameters(); biases are (n, 1).
  std::vector<std::pair<std::size_t, std::size_t>> parameter_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (auto& l : recurrent) {
      out.emplace_back(l.w_input.rows, l.w_input.cols);
      out.emplace_back(l.w_hidden.rows, l.w_hidden.cols);
      out.emplace_back(l.bias.size(), 1);
    }
    for (auto& l : dense) {
      out.emplace_back(l.weights.rows, l.weights.cols);
      out.emplace_back(l.bias.size(), 1);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto s : parameters()) n += s.size();
    return n;
  }
};

/// Contiguous [steps x dim] window of model inputs.
template <class T>
struct WindowView {
  std::span<const T> values;
  std::size_t steps = 0;
  std::size_t dim = 0;

  std::span<const T> row(std::size_t t) const { return values.subspan(t * dim, dim); }
};

/// Flattens frames into the model's scalar type. Every inference path goes
/// through this conversion, so streaming and batch inputs are bit-identical.
template <class T>
std::vector<T> window_buffer(std::span<const FrameVector> frames) {
  std::vector<T> out;
  if (frames.empty()) return out;
  out.reserve(frames.size() * frames.front().features.size());
  for (const auto& f : frames) {
    for (double v : f.features) out.push_back(static_cast<T>(v));
  }
  return out;
}

template <class T>
WindowView<T> view_of(const std::vector<T>& buffer, std::size_t steps) {
  return {std::span<const T>(buffer), steps, steps == 0 ? 0 : buffer.size() / steps};
}

template <class T>
std::vector<T> pool_sequence(WindowView<T> window, PoolKind kind) {
  if (window.steps == 0) throw ContractError("cannot pool an empty window");
  if (kind == PoolKind::flatten) return {window.values.begin(), window.values.end()};
  std::vector<T> out(window.dim, T(0));
  for (std::size_t t = 0; t < window.steps; ++t) {
    const auto r = window.row(t);
    for (std::size_t d = 0; d < window.dim; ++d) out[d] += r[d];
  }
  const T steps = static_cast<T>(window.steps);
  for (auto& v : out) v /= steps;
  return out;
}

template <class T>
struct ForwardTrace {
  std::vector<std::vector<LstmCache<T>>> recurrent;  // [layer][step]
  std::vector<std::vector<T>> dense_inputs;          // input of each dense layer
  std::vector<T> logits;
  std::vector<T> probs;
};

namespace detail {

template <class T>
void check_window(const Model<T>& m, WindowView<T> window) {
  if (window.steps != m.arch.window || window.dim != m.arch.input_dim ||
      window.values.size() != window.steps * window.dim) {
    throw ShapeError("model expects a window of " + std::to_string(m.arch.window) + " x " + std::to_string(m.arch.input_dim) +
                     ", got " + std::to_string(window.steps) + " x " + std::to_string(window.dim));
  }
}

}  // namespace detail

template <class T>
ForwardTrace<T> forward_trace(const Model<T>& m, WindowView<T> window) {
  detail::check_window(m, window);
  const bool shifted = !m.input_offset.empty();
  if (shifted && m.input_offset.size() != m.arch.input_dim) throw ShapeError("input offset does not match input_dim");
  ForwardTrace<T> trace;
  std::vector<T> head_input;
  if (m.arch.kind == ModelKind::lstm_classifier) {
    std::vector<std::vector<T>> inputs(window.steps);
    for (std::size_t t = 0; t < window.steps; ++t) {
      inputs[t].assign(window.row(t).begin(), window.row(t).end());
      if (shifted) {
        for (std::size_t d = 0; d < window.dim; ++d) inputs[t][d] -= m.input_offset[d];
      }
    }
    trace.recurrent.resize(m.recurrent.size());
    for (std::size_t l = 0; l < m.recurrent.size(); ++l) {
      const auto& layer = m.recurrent[l];
      auto state = LstmState<T>::zeros(layer.hidden_size());
      trace.recurrent[l].reserve(window.steps);
      for (std::size_t t = 0; t < window.steps; ++t) {
        auto [next, cache] = lstm_cell_forward(layer, std::span<const T>(inputs[t]), state);
        inputs[t] = next.hidden;
        state = std::move(next);
        trace.recurrent[l].push_back(std::move(cache));
      }
    }
    head_input = std::move(inputs.back());
  } else {
    head_input = pool_sequence(window, m.arch.pool);
    if (shifted) {
      for (std::size_t i = 0; i < head_input.size(); ++i) head_input[i] -= m.input_offset[i % window.dim];
    }
  }

  trace.dense_inputs.reserve(m.dense.size());
  std::vector<T> a = std::move(head_input);
  for (std::size_t j = 0; j < m.dense.size(); ++j) {
    std::vector<T> z = dense_forward(m.dense[j], std::span<const T>(a));
    trace.dense_inputs.push_back(std::move(a));
    if (j + 1 < m.dense.size()) apply_activation(m.arch.hidden_activation, std::span<T>(z));
    a = std::move(z);
  }
  trace.logits = std::move(a);
  trace.probs = softmax(std::span<const T>(trace.logits));
  return trace;
}

template <class T>
std::vector<T> model_forward(const Model<T>& m, WindowView<T> window) {
  return forward_trace(m, window).probs;
}

template <class T>
std::vector<T> model_forward(const Model<T>& m, std::span<const FrameVector> frames) {
  const auto buffer = window_buffer<T>(frames);
  return model_forward(m, view_of(buffer, frames.size()));
}

/// Categorical cross-entropy -log p[label], computed from the logits.
template <class T>
T model_loss(const Model<T>& m, WindowView<T> window, std::size_t label) {
  if (label >= m.arch.class_count) throw ContractError("label out of range");
  const auto trace = forward_trace(m, window);
  return log_sum_exp(std::span<const T>(trace.logits)) - trace.logits[label];
}

/// Adds scale * dLoss/dTheta into `grads` (same shape as `m`) and returns the
/// unscaled loss. `predicted`, when given, receives the forward argmax.
template <class T>
T backward_accumulate(const Model<T>& m, WindowView<T> window, std::size_t label, Model<T>& grads, T scale = T(1),
                      std::size_t* predicted = nullptr) {
  if (label >= m.arch.class_count) throw ContractError("label out of range");
  if (!(grads.arch == m.arch)) throw ShapeError("gradient buffer does not match the model");
  const auto trace = forward_trace(m, window);
  const T loss = log_sum_exp(std::span<const T>(trace.logits)) - trace.logits[label];
  if (predicted) *predicted = argmax(std::span<const T>(trace.probs));

  // Softmax fused with cross-entropy: dL/dz = p - onehot.
  std::vector<T> dz(trace.probs);
  dz[label] -= T(1);
  for (auto& v : dz) v *= scale;

  std::vector<T> da;
  for (std::size_t jj = m.dense.size(); jj-- > 0;) {
    const auto& layer = m.dense[jj];
    const auto& input = trace.dense_inputs[jj];
    outer_accumulate(grads.dense[jj].weights, std::span<const T>(dz), std::span<const T>(input));
    for (std::size_t r = 0; r < dz.size(); ++r) grads.dense[jj].bias[r] += dz[r];
    da.assign(layer.in_dim(), T(0));
    gemv_transposed_accumulate(layer.weights, std::span<const T>(dz), std::span<T>(da));
    if (jj > 0) {
      for (std::size_t k = 0; k < da.size(); ++k) da[k] *= activation_derivative(m.arch.hidden_activation, input[k]);
      dz = da;
    }
  }

  if (m.arch.kind == ModelKind::lstm_classifier) {
    const std::size_t steps = window.steps;
    // External gradient arriving at each step's hidden output.
    std::vector<std::vector<T>> d_external(steps);
    for (std::size_t t = 0; t + 1 < steps; ++t) d_external[t].assign(m.recurrent.back().hidden_size(), T(0));
    d_external[steps - 1] = std::move(da);
    for (std::size_t l = m.recurrent.size(); l-- > 0;) {
      const auto& layer = m.recurrent[l];
      std::vector<std::vector<T>> d_below;
      if (l > 0) d_below.assign(steps, std::vector<T>(layer.input_size(), T(0)));
      std::vector<T> d_hidden(layer.hidden_size(), T(0));
      std::vector<T> d_cell(layer.hidden_size(), T(0));
      for (std::size_t t = steps; t-- > 0;) {
        for (std::size_t k = 0; k < d_hidden.size(); ++k) d_hidden[k] += d_external[t][k];
        std::span<T> d_in = l > 0 ? std::span<T>(d_below[t]) : std::span<T>();
        lstm_cell_backward(layer, trace.recurrent[l][t], d_hidden, d_cell, grads.recurrent[l], d_in);
      }
      if (l > 0) d_external = std::move(d_below);
    }
  }
  return loss;
}

template <class T>
struct Gradients {
  Model<T> grads;
  T loss = T(0);
};

/// Exact gradients of scale * (-log p[label]).
template <class T>
Gradients<T> model_backward(const Model<T>& m, WindowView<T> window, std::size_t label, T scale = T(1)) {
  Gradients<T> g{Model<T>::zeros(m.arch), T(0)};
  g.loss = backward_accumulate(m, window, label, g.grads, scale);
  return g;
}

/// Scaled-uniform init: U(+-sqrt(6/(rows+cols))) per matrix, zero biases,
/// LSTM forget-gate bias 1. Each tensor draws from its own sub-stream.
template <class T>
Model<T> init_params(const ArchConfig& arch, std::uint64_t seed) {
  Model<T> m = Model<T>::zeros(arch);
  std::uint64_t tensor = 0;
  auto fill = [&](Matrix<T>& w) {
    SplitMix64 rng(derive_seed(seed, tensor++));
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
  };
  for (auto& l : m.recurrent) {
    fill(l.w_input);
    fill(l.w_hidden);
    ++tensor;
    const std::size_t h = l.hidden_size();
    for (std::size_t k = h; k < 2 * h; ++k) l.bias[k] = T(1);
  }
  for (auto& l : m.dense) {
    fill(l.weights);
    ++tensor;
  }
  return m;
}

}  // namespace kpaction::neural
