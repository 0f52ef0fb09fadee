#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "kpaction/neural/model.hpp"

namespace kpaction::neural {

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Compares model_backward against central differences on every parameter
/// coordinate. relative error = |a - n| / max(|a|, |n|, 1e-8).
///
/// Central differences in double carry roughly 1e-11 of absolute rounding
/// noise, so coordinates whose gradient is below ~1e-7 can exceed 1e-4 even
/// when backward is exact. Instantiating with long double lowers that floor.
template <class T>
GradientCheckReport gradient_check(const Model<T>& model, WindowView<T> window, std::size_t label,
                                   double epsilon = 1e-5, double tolerance = 1e-4) {
  static_assert(sizeof(T) >= sizeof(double), "gradient checking needs at least 64-bit arithmetic");
  if (!(epsilon > 0.0)) throw ContractError("epsilon must be > 0");
  const auto analytic = model_backward(model, window, label);
  const auto analytic_params = analytic.grads.parameters();
  const auto names = model.parameter_names();

  Model<T> probe = model;
  const T eps = static_cast<T>(epsilon);
  auto params = probe.parameters();
  GradientCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const T saved = params[i][k];
      params[i][k] = saved + eps;
      const T up = model_loss(probe, window, label);
      params[i][k] = saved - eps;
      const T down = model_loss(probe, window, label);
      params[i][k] = saved;

      const double numeric = static_cast<double>((up - down) / (T(2) * eps));
      const double a = static_cast<double>(analytic_params[i][k]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.coordinates;
      if (rel > report.max_rel_error || report.worst_parameter.empty()) {
        report.max_rel_error = rel;
        report.worst_parameter = names[i];
        report.worst_index = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace kpaction::neural
