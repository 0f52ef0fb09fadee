#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kpaction/detail/numeric_text.hpp"
#include "kpaction/error.hpp"
#include "kpaction/keypoints.hpp"
#include "kpaction/neural/model.hpp"
#include "kpaction/train_eval/train.hpp"

namespace kpaction {

struct StreamSettings {
  std::size_t smoothing_k = 10;
  double confidence_threshold = 0.5;

  void validate() const {
    if (smoothing_k < 1) throw ContractError("smoothing_k must be >= 1");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) throw ContractError("threshold must lie in [0, 1]");
  }
};

struct PredictionEvent {
  std::size_t frame_index = 0;
  std::string label;
  double confidence = 0.0;
  std::vector<double> raw_probs;

  bool operator==(const PredictionEvent&) const = default;
};

/// {"frame": n, "label": s, "confidence": x, "probs": [...]}
inline std::string to_json_line(const PredictionEvent& e) {
  std::string out = "{\"frame\":" + std::to_string(e.frame_index) + ",\"label\":" + nlohmann::json(e.label).dump() +
                    ",\"confidence\":";
  detail::append_number(out, e.confidence);
  out += ",\"probs\":[";
  for (std::size_t i = 0; i < e.raw_probs.size(); ++i) {
    if (i) out += ',';
    detail::append_number(out, e.raw_probs[i]);
  }
  out += "]}";
  return out;
}

/// Sliding-window predictor over a frame stream. Keeps the last `window`
/// frames and the last `smoothing_k` probability vectors; the emitted label is
/// the argmax of their element-wise mean. Single consumer.
template <class T>
class StreamPredictor {
 public:
  StreamPredictor(TrainedModel<T> model, StreamSettings settings)
      : model_(std::move(model)), settings_(settings), window_(model_.net.arch.window) {
    settings_.validate();
    if (model_.classes.size() != model_.net.arch.class_count) throw ContractError("model class names do not match its head");
    ring_.resize(window_);
  }

  /// Returns an event once the window is full and the smoothed confidence
  /// reaches the threshold.
  std::optional<PredictionEvent> push_frame(const FrameVector& frame) {
    if (frame.features.size() != model_.net.arch.input_dim) {
      throw ShapeError("frame has " + std::to_string(frame.features.size()) + " values, model expects " +
                       std::to_string(model_.net.arch.input_dim));
    }
    const std::size_t index = seen_++;
    ring_[head_] = frame;
    head_ = (head_ + 1) % window_;
    if (filled_ < window_) ++filled_;
    if (filled_ < window_) return std::nullopt;

    // Oldest frame first: the slot after the most recent write.
    std::vector<FrameVector> ordered;
    ordered.reserve(window_);
    for (std::size_t k = 0; k < window_; ++k) ordered.push_back(ring_[(head_ + k) % window_]);
    const auto probs = neural::model_forward(model_.net, std::span<const FrameVector>(ordered));
    last_probs_.assign(probs.begin(), probs.end());
    history_.push_back(last_probs_);
    if (history_.size() > settings_.smoothing_k) history_.pop_front();

    std::vector<double> smoothed(last_probs_.size(), 0.0);
    for (const auto& h : history_) {
      for (std::size_t c = 0; c < smoothed.size(); ++c) smoothed[c] += h[c];
    }
    for (auto& v : smoothed) v /= static_cast<double>(history_.size());
    const std::size_t best = neural::argmax(std::span<const double>(smoothed));
    if (smoothed[best] < settings_.confidence_threshold) return std::nullopt;
    return PredictionEvent{index, model_.classes[best], smoothed[best], last_probs_};
  }

  std::size_t frames_seen() const noexcept { return seen_; }
  std::size_t buffered() const noexcept { return filled_; }
  std::size_t history_size() const noexcept { return history_.size(); }
  /// Probabilities of the most recent full window (empty during warm-up).
  const std::vector<double>& last_probs() const noexcept { return last_probs_; }
  const TrainedModel<T>& model() const noexcept { return model_; }
  const StreamSettings& settings() const noexcept { return settings_; }

 private:
  TrainedModel<T> model_;
  StreamSettings settings_;
  std::size_t window_;
  std::vector<FrameVector> ring_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  std::size_t seen_ = 0;
  std::deque<std::vector<double>> history_;
  std::vector<double> last_probs_;
};

/// Folds push_frame over `frames` and collects the events in order.
template <class T, class Range>
std::vector<PredictionEvent> run_stream(StreamPredictor<T>& predictor, const Range& frames) {
  std::vector<PredictionEvent> events;
  for (const FrameVector& f : frames) {
    if (auto e = predictor.push_frame(f)) events.push_back(std::move(*e));
  }
  return events;
}

/// Keeps only events whose label differs from the previous kept event.
inline std::vector<PredictionEvent> label_changes(const std::vector<PredictionEvent>& events) {
  std::vector<PredictionEvent> out;
  for (const auto& e : events) {
    if (out.empty() || out.back().label != e.label) out.push_back(e);
  }
  return out;
}

}  // namespace kpaction
