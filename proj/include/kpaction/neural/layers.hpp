#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kpaction/error.hpp"

namespace kpaction::neural {

/// Dense row-major matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// y += W x. Four interleaved partial sums combined in a fixed order, so the
/// result is deterministic but not identical to a naive left-to-right sum.
template <class T>
void gemv_accumulate(const Matrix<T>& w, std::span<const T> x, std::span<T> y) {
  const std::size_t n = w.cols;
  const std::size_t n4 = n - n % 4;
  const T* xp = x.data();
  for (std::size_t r = 0; r < w.rows; ++r) {
    const T* wr = w.data.data() + r * n;
    T a0 = T(0), a1 = T(0), a2 = T(0), a3 = T(0);
    for (std::size_t c = 0; c < n4; c += 4) {
      a0 += wr[c] * xp[c];
      a1 += wr[c + 1] * xp[c + 1];
      a2 += wr[c + 2] * xp[c + 2];
      a3 += wr[c + 3] * xp[c + 3];
    }
    for (std::size_t c = n4; c < n; ++c) a0 += wr[c] * xp[c];
    y[r] += (a0 + a1) + (a2 + a3);
  }
}

/// x_grad += W^T dy
template <class T>
void gemv_transposed_accumulate(const Matrix<T>& w, std::span<const T> dy, std::span<T> x_grad) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const T d = dy[r];
    if (d == T(0)) continue;
    const T* wr = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) x_grad[c] += wr[c] * d;
  }
}

/// W_grad += dy x^T
template <class T>
void outer_accumulate(Matrix<T>& w_grad, std::span<const T> dy, std::span<const T> x) {
  for (std::size_t r = 0; r < w_grad.rows; ++r) {
    const T d = dy[r];
    if (d == T(0)) continue;
    T* gr = w_grad.data.data() + r * w_grad.cols;
    for (std::size_t c = 0; c < w_grad.cols; ++c) gr[c] += d * x[c];
  }
}

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ContractError("unknown activation '" + s + "' (expected relu or tanh)");
}

template <class T>
std::vector<T> relu(std::span<const T> x) {
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <class T>
T sigmoid(T x) {
  // Split by sign so exp never overflows.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
void apply_activation(Activation a, std::span<T> x) {
  if (a == Activation::relu) {
    for (auto& v : x) v = v > T(0) ? v : T(0);
  } else {
    for (auto& v : x) v = std::tanh(v);
  }
}

/// d(act)/dz expressed through the activation output.
template <class T>
T activation_derivative(Activation a, T output) {
  if (a == Activation::relu) return output > T(0) ? T(1) : T(0);
  return T(1) - output * output;
}

/// Max-subtracted softmax; sums to one up to rounding.
template <class T>
std::vector<T> softmax(std::span<const T> x) {
  std::vector<T> y(x.size());
  if (x.empty()) return y;
  const T m = *std::max_element(x.begin(), x.end());
  T sum = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    sum += y[i];
  }
  for (auto& v : y) v /= sum;
  return y;
}

/// log(sum(exp(x))) without overflow.
template <class T>
T log_sum_exp(std::span<const T> x) {
  const T m = *std::max_element(x.begin(), x.end());
  T sum = T(0);
  for (T v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

/// Index of the largest entry; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] > x[best]) best = i;
  }
  return best;
}

template <class T>
struct DenseParams {
  Matrix<T> weights;  // [out x in]
  std::vector<T> bias;

  DenseParams() = default;
  DenseParams(std::size_t in_dim, std::size_t out_dim) : weights(out_dim, in_dim), bias(out_dim, T(0)) {}

  std::size_t in_dim() const noexcept { return weights.cols; }
  std::size_t out_dim() const noexcept { return weights.rows; }
  bool operator==(const DenseParams&) const = default;
};

template <class T>
std::vector<T> dense_forward(const DenseParams<T>& p, std::span<const T> x) {
  if (x.size() != p.in_dim()) {
    throw ShapeError("dense layer expects " + std::to_string(p.in_dim()) + " inputs, got " + std::to_string(x.size()));
  }
  std::vector<T> y(p.bias);
  gemv_accumulate(p.weights, x, std::span<T>(y));
  return y;
}

/// Standard LSTM weights, gate blocks ordered (input, forget, candidate, output).
template <class T>
struct LstmParams {
  Matrix<T> w_input;   // [4H x D]
  Matrix<T> w_hidden;  // [4H x H]
  std::vector<T> bias; // [4H]

  LstmParams() = default;
  LstmParams(std::size_t input_size, std::size_t hidden_size)
      : w_input(4 * hidden_size, input_size), w_hidden(4 * hidden_size, hidden_size), bias(4 * hidden_size, T(0)) {}

  std::size_t input_size() const noexcept { return w_input.cols; }
  std::size_t hidden_size() const noexcept { return w_hidden.cols; }
  bool operator==(const LstmParams&) const = default;
};

template <class T>
struct LstmState {
  std::vector<T> hidden;
  std::vector<T> cell;

  static LstmState zeros(std::size_t h) { return {std::vector<T>(h, T(0)), std::vector<T>(h, T(0))}; }
};

/// Everything the backward pass needs from one step.
template <class T>
struct LstmCache {
  std::vector<T> input;
  std::vector<T> hidden_prev;
  std::vector<T> cell_prev;
  std::vector<T> gates;  // activated i, f, g, o blocks, [4H]
  std::vector<T> cell;
  std::vector<T> cell_tanh;
};

template <class T>
std::pair<LstmState<T>, LstmCache<T>> lstm_cell_forward(const LstmParams<T>& p, std::span<const T> x,
                                                        const LstmState<T>& s) {
  const std::size_t h = p.hidden_size();
  if (x.size() != p.input_size()) {
    throw ShapeError("LSTM cell expects " + std::to_string(p.input_size()) + " inputs, got " + std::to_string(x.size()));
  }
  if (s.hidden.size() != h || s.cell.size() != h) throw ShapeError("LSTM state does not match hidden size");

  LstmCache<T> cache;
  cache.input.assign(x.begin(), x.end());
  cache.hidden_prev = s.hidden;
  cache.cell_prev = s.cell;
  cache.gates = p.bias;
  gemv_accumulate(p.w_input, x, std::span<T>(cache.gates));
  gemv_accumulate(p.w_hidden, std::span<const T>(s.hidden), std::span<T>(cache.gates));

  T* gi = cache.gates.data();
  T* gf = gi + h;
  T* gg = gf + h;
  T* go = gg + h;
  LstmState<T> next{std::vector<T>(h), std::vector<T>(h)};
  cache.cell.resize(h);
  cache.cell_tanh.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    gi[k] = sigmoid(gi[k]);
    gf[k] = sigmoid(gf[k]);
    gg[k] = std::tanh(gg[k]);
    go[k] = sigmoid(go[k]);
    const T c = gf[k] * s.cell[k] + gi[k] * gg[k];
    const T tc = std::tanh(c);
    cache.cell[k] = c;
    cache.cell_tanh[k] = tc;
    next.cell[k] = c;
    next.hidden[k] = go[k] * tc;
  }
  return {std::move(next), std::move(cache)};
}

/// Backward through one step. `d_hidden`/`d_cell` are gradients w.r.t. this
/// step's outputs; on return they hold the gradients for the previous step.
/// Parameter gradients accumulate into `grads`; `d_input` (if non-empty) receives dL/dx.
template <class T>
void lstm_cell_backward(const LstmParams<T>& p, const LstmCache<T>& cache, std::vector<T>& d_hidden,
                        std::vector<T>& d_cell, LstmParams<T>& grads, std::span<T> d_input) {
  const std::size_t h = p.hidden_size();
  const T* gi = cache.gates.data();
  const T* gf = gi + h;
  const T* gg = gf + h;
  const T* go = gg + h;
  std::vector<T> dz(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const T dc = d_cell[k] + d_hidden[k] * go[k] * (T(1) - cache.cell_tanh[k] * cache.cell_tanh[k]);
    const T d_o = d_hidden[k] * cache.cell_tanh[k];
    const T d_i = dc * gg[k];
    const T d_g = dc * gi[k];
    const T d_f = dc * cache.cell_prev[k];
    dz[k] = d_i * gi[k] * (T(1) - gi[k]);
    dz[h + k] = d_f * gf[k] * (T(1) - gf[k]);
    dz[2 * h + k] = d_g * (T(1) - gg[k] * gg[k]);
    dz[3 * h + k] = d_o * go[k] * (T(1) - go[k]);
    d_cell[k] = dc * gf[k];
  }
  const std::span<const T> dzs(dz);
  outer_accumulate(grads.w_input, dzs, std::span<const T>(cache.input));
  outer_accumulate(grads.w_hidden, dzs, std::span<const T>(cache.hidden_prev));
  for (std::size_t r = 0; r < 4 * h; ++r) grads.bias[r] += dz[r];
  std::fill(d_hidden.begin(), d_hidden.end(), T(0));
  gemv_transposed_accumulate(p.w_hidden, dzs, std::span<T>(d_hidden));
  if (!d_input.empty()) gemv_transposed_accumulate(p.w_input, dzs, d_input);
}

}  // namespace kpaction::neural

namespace kpaction::neural {

template <class T>
std::vector<T> relu(const std::vector<T>& x) { return relu(std::span<const T>(x)); }
template <class T>
std::vector<T> softmax(const std::vector<T>& x) { return softmax(std::span<const T>(x)); }
template <class T>
std::size_t argmax(const std::vector<T>& x) { return argmax(std::span<const T>(x)); }
template <class T>
std::vector<T> dense_forward(const DenseParams<T>& p, const std::vector<T>& x) { return dense_forward(p, std::span<const T>(x)); }
template <class T>
std::pair<LstmState<T>, LstmCache<T>> lstm_cell_forward(const LstmParams<T>& p, const std::vector<T>& x, const LstmState<T>& s) {
  return lstm_cell_forward(p, std::span<const T>(x), s);
}

}  // namespace kpaction::neural
