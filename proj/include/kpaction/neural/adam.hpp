#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kpaction/error.hpp"

namespace kpaction::neural {

template <class T>
struct AdamState {
  T learning_rate = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  void validate() const {
    if (!(learning_rate > T(0))) throw ContractError("learning_rate must be > 0");
    if (!(beta1 >= T(0) && beta1 < T(1))) throw ContractError("beta1 must lie in [0, 1)");
    if (!(beta2 >= T(0) && beta2 < T(1))) throw ContractError("beta2 must lie in [0, 1)");
    if (!(epsilon > T(0))) throw ContractError("epsilon must be > 0");
  }
};

/// One bias-corrected Adam update over a list of parameter tensors. Moment
/// buffers are created on the first call and must keep the same shapes.
template <class T>
void adam_step(AdamState<T>& st, const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient lists differ in length");
  if (st.m.empty() && st.step == 0) {
    for (const auto& p : params) {
      st.m.emplace_back(p.size(), T(0));
      st.v.emplace_back(p.size(), T(0));
    }
  }
  if (st.m.size() != params.size()) throw ShapeError("adam_step: optimizer state has a different tensor count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || st.m[i].size() != params[i].size()) {
      throw ShapeError("adam_step: tensor " + std::to_string(i) + " shape mismatch");
    }
  }

  ++st.step;
  const T correction1 = T(1) - static_cast<T>(std::pow(static_cast<double>(st.beta1), static_cast<double>(st.step)));
  const T correction2 = T(1) - static_cast<T>(std::pow(static_cast<double>(st.beta2), static_cast<double>(st.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = st.m[i];
    auto& v = st.v[i];
    const auto g = grads[i];
    const auto p = params[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = st.beta1 * m[k] + (T(1) - st.beta1) * g[k];
      v[k] = st.beta2 * v[k] + (T(1) - st.beta2) * g[k] * g[k];
      const T m_hat = m[k] / correction1;
      const T v_hat = v[k] / correction2;
      p[k] -= st.learning_rate * m_hat / (std::sqrt(v_hat) + st.epsilon);
    }
  }
}

}  // namespace kpaction::neural
