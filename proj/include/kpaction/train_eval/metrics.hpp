#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kpaction/error.hpp"
#include "kpaction/neural/layers.hpp"

namespace kpaction {

/// K x K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> class_names)
      : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {}
  explicit ConfusionMatrix(std::size_t classes) : ConfusionMatrix(default_names(classes)) {}

  std::size_t classes() const noexcept { return names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return names_; }

  void add(std::size_t truth, std::size_t predicted) {
    if (truth >= classes() || predicted >= classes()) throw ContractError("class index out of range");
    ++counts_[truth * classes() + predicted];
  }

  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * classes() + predicted); }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }

  std::uint64_t trace() const {
    std::uint64_t n = 0;
    for (std::size_t k = 0; k < classes(); ++k) n += at(k, k);
    return n;
  }

  std::uint64_t row_sum(std::size_t truth) const {
    std::uint64_t n = 0;
    for (std::size_t p = 0; p < classes(); ++p) n += at(truth, p);
    return n;
  }

  /// Samples predicted as `k` whose true class is something else.
  std::uint64_t false_positives(std::size_t k) const {
    std::uint64_t n = 0;
    for (std::size_t t = 0; t < classes(); ++t) {
      if (t != k) n += at(t, k);
    }
    return n;
  }

  std::uint64_t false_negatives(std::size_t k) const { return row_sum(k) - at(k, k); }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  static std::vector<std::string> default_names(std::size_t k) {
    std::vector<std::string> n;
    for (std::size_t i = 0; i < k; ++i) n.push_back("class" + std::to_string(i));
    return n;
  }

  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                        std::size_t classes) {
  if (predictions.size() != labels.size()) throw ContractError("predictions and labels differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
  return cm;
}

/// TP / (TP + FN) for class k.
inline double true_positive_rate(const ConfusionMatrix& cm, std::size_t k) {
  if (k >= cm.classes()) throw ContractError("class index out of range");
  const auto row = cm.row_sum(k);
  if (row == 0) throw UndefinedRateError("true positive rate undefined for class " + std::to_string(k) + ": no samples");
  return static_cast<double>(cm.at(k, k)) / static_cast<double>(row);
}

/// Fraction of rows whose argmax (ties to the lowest index) equals the label.
template <class T>
double categorical_accuracy(std::span<const std::vector<T>> probs, std::span<const std::size_t> labels) {
  if (probs.size() != labels.size()) throw ContractError("probabilities and labels differ in length");
  if (probs.empty()) throw ContractError("categorical accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (neural::argmax(std::span<const T>(probs[i])) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  /// Empty where the class has no samples.
  std::vector<std::optional<double>> tpr;
  std::vector<std::uint64_t> false_positives;

  static EvalReport from_confusion(ConfusionMatrix cm) {
    EvalReport r;
    const auto total = cm.total();
    r.accuracy = total == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(total);
    for (std::size_t k = 0; k < cm.classes(); ++k) {
      r.tpr.push_back(cm.row_sum(k) == 0 ? std::nullopt : std::optional<double>(true_positive_rate(cm, k)));
      r.false_positives.push_back(cm.false_positives(k));
    }
    r.confusion = std::move(cm);
    return r;
  }

  /// Off-diagonal mass: every misclassified sample.
  std::uint64_t errors() const { return confusion.total() - confusion.trace(); }
};

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["classes"] = r.confusion.class_names();
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  j["total"] = r.confusion.total();
  j["accuracy"] = r.accuracy;
  auto tpr = nlohmann::ordered_json::array();
  for (const auto& v : r.tpr) tpr.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
  j["tpr"] = tpr;
  j["false_positives"] = r.false_positives;
  return j;
}

/// "truth\predicted,<class>..." header then one row per true class.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "truth\\predicted";
  for (const auto& n : cm.class_names()) out += "," + n;
  out += "\n";
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    out += cm.class_names()[t];
    for (std::size_t p = 0; p < cm.classes(); ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  return out;
}

}  // namespace kpaction
