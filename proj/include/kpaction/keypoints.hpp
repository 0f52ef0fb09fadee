#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kpaction/error.hpp"
#include "kpaction/rng.hpp"

namespace kpaction {

struct LandmarkSegment {
  std::string name;
  std::size_t landmark_count = 0;
  std::size_t values_per_landmark = 0;

  bool operator==(const LandmarkSegment&) const = default;
};

/// Ordered list of landmark blocks making up one flat frame vector.
class LandmarkLayout {
 public:
  /// Location of one landmark inside the flat feature vector.
  struct Slot {
    std::size_t offset = 0;
    std::size_t values = 0;
  };

  LandmarkLayout() = default;

  explicit LandmarkLayout(std::vector<LandmarkSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw ContractError("layout has no segments");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const auto& s = segments_[i];
      if (s.name.empty()) throw ContractError("layout segment " + std::to_string(i) + " has an empty name");
      if (s.landmark_count == 0 || s.values_per_landmark == 0) {
        throw ContractError("layout segment '" + s.name + "' must have landmark_count and values_per_landmark >= 1");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (segments_[j].name == s.name) throw ContractError("duplicate layout segment '" + s.name + "'");
      }
      total_dim_ += s.landmark_count * s.values_per_landmark;
      landmark_count_ += s.landmark_count;
    }
  }

  /// Pose 33x4, face 468x3, left hand 21x3, right hand 21x3 (1662 values).
  static LandmarkLayout holistic_full() {
    return LandmarkLayout({{"pose", 33, 4}, {"face", 468, 3}, {"left_hand", 21, 3}, {"right_hand", 21, 3}});
  }

  /// Pose 33x4 (132 values).
  static LandmarkLayout pose_only() { return LandmarkLayout({{"pose", 33, 4}}); }

  const std::vector<LandmarkSegment>& segments() const noexcept { return segments_; }
  std::size_t total_dim() const noexcept { return total_dim_; }
  std::size_t landmark_count() const noexcept { return landmark_count_; }
  bool empty() const noexcept { return segments_.empty(); }

  std::optional<std::size_t> find_segment(std::string_view name) const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i].name == name) return i;
    }
    return std::nullopt;
  }

  /// Offset of the first value of segment `index`.
  std::size_t segment_offset(std::size_t index) const {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < index && i < segments_.size(); ++i) {
      offset += segments_[i].landmark_count * segments_[i].values_per_landmark;
    }
    return offset;
  }

  /// Slot of a landmark by global index (segments concatenated in order).
  Slot landmark(std::size_t index) const {
    std::size_t offset = 0;
    for (const auto& s : segments_) {
      if (index < s.landmark_count) return {offset + index * s.values_per_landmark, s.values_per_landmark};
      index -= s.landmark_count;
      offset += s.landmark_count * s.values_per_landmark;
    }
    throw ContractError("landmark index out of range");
  }

  bool operator==(const LandmarkLayout& other) const { return segments_ == other.segments_; }

 private:
  std::vector<LandmarkSegment> segments_;
  std::size_t total_dim_ = 0;
  std::size_t landmark_count_ = 0;
};

/// Flattened keypoints of one frame. Missing detections are zeros.
struct FrameVector {
  double timestamp_s = 0.0;
  std::vector<double> features;

  bool operator==(const FrameVector&) const = default;
};

struct KeypointSequence {
  LandmarkLayout layout;
  double fps = 10.0;
  std::vector<FrameVector> frames;
  /// Index into `classes`. Requires `classes` when set.
  std::optional<std::size_t> label;
  std::optional<std::vector<std::string>> classes;

  bool operator==(const KeypointSequence&) const = default;

  std::optional<std::string> label_name() const {
    if (!label || !classes || *label >= classes->size()) return std::nullopt;
    return (*classes)[*label];
  }

  void validate() const {
    if (layout.empty()) throw ContractError("sequence has no layout");
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ContractError("fps must be a positive finite number");
    if (label && (!classes || *label >= classes->size())) throw ContractError("label is not one of the sequence classes");
    const std::size_t dim = layout.total_dim();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      if (f.features.size() != dim) {
        throw ShapeError("frame " + std::to_string(i) + " has " + std::to_string(f.features.size()) +
                         " values, layout expects " + std::to_string(dim));
      }
      if (!std::isfinite(f.timestamp_s) || f.timestamp_s < 0.0) {
        throw ContractError("frame " + std::to_string(i) + " has an invalid timestamp");
      }
      if (i > 0 && !(f.timestamp_s > frames[i - 1].timestamp_s)) {
        throw ContractError("timestamps must be strictly increasing (frame " + std::to_string(i) + ")");
      }
      for (double v : f.features) {
        if (!std::isfinite(v)) throw ContractError("frame " + std::to_string(i) + " has a non-finite value");
      }
    }
  }
};

/// Labeled sequences sharing one layout and one window length.
struct Dataset {
  std::vector<std::string> classes;
  std::vector<KeypointSequence> sequences;

  bool operator==(const Dataset&) const = default;

  bool empty() const noexcept { return sequences.empty(); }
  std::size_t size() const noexcept { return sequences.size(); }
  std::size_t window() const { return sequences.empty() ? 0 : sequences.front().frames.size(); }
  std::size_t feature_dim() const { return sequences.empty() ? 0 : sequences.front().layout.total_dim(); }
  const LandmarkLayout& layout() const {
    if (sequences.empty()) throw ContractError("empty dataset has no layout");
    return sequences.front().layout;
  }

  std::size_t label_of(std::size_t i) const { return *sequences.at(i).label; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (const auto& s : sequences) ++counts.at(*s.label);
    return counts;
  }

  void validate() const {
    if (classes.empty()) throw ContractError("dataset has no classes");
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const auto& s = sequences[i];
      s.validate();
      if (!s.label) throw ContractError("dataset sequence " + std::to_string(i) + " is unlabeled");
      if (*s.label >= classes.size()) throw ContractError("dataset sequence " + std::to_string(i) + " has an out-of-range label");
      if (!(s.layout == sequences.front().layout)) throw ShapeError("dataset sequences use different layouts");
      if (s.frames.size() != sequences.front().frames.size()) {
        throw ShapeError("dataset sequence " + std::to_string(i) + " has " + std::to_string(s.frames.size()) +
                         " frames, expected " + std::to_string(sequences.front().frames.size()));
      }
    }
  }
};

/// Subtracts the reference landmark's x,y from every landmark's x,y in each
/// frame. Values past the first two of a landmark (depth, visibility) are
/// left alone.
inline KeypointSequence normalize_sequence(const KeypointSequence& seq, std::size_t reference) {
  if (reference >= seq.layout.landmark_count()) throw ContractError("reference landmark index out of range");
  const auto ref = seq.layout.landmark(reference);
  if (ref.values < 2) throw ContractError("reference landmark has fewer than two coordinates");

  KeypointSequence out = seq;
  for (auto& frame : out.frames) {
    const double rx = frame.features[ref.offset];
    const double ry = frame.features[ref.offset + 1];
    std::size_t offset = 0;
    for (const auto& s : seq.layout.segments()) {
      if (s.values_per_landmark >= 2) {
        for (std::size_t l = 0; l < s.landmark_count; ++l) {
          const std::size_t at = offset + l * s.values_per_landmark;
          frame.features[at] -= rx;
          frame.features[at + 1] -= ry;
        }
      }
      offset += s.landmark_count * s.values_per_landmark;
    }
  }
  return out;
}

/// Views of every `window`-long run of frames starting at multiples of
/// `stride`. Returns floor((N - window) / stride) + 1 views, or none if N < window.
inline std::vector<std::span<const FrameVector>> window_stream(std::span<const FrameVector> frames, std::size_t window,
                                                               std::size_t stride) {
  if (window == 0) throw ContractError("window must be >= 1");
  if (stride == 0) throw ContractError("stride must be >= 1");
  std::vector<std::span<const FrameVector>> windows;
  if (frames.size() < window) return windows;
  windows.reserve((frames.size() - window) / stride + 1);
  for (std::size_t start = 0; start + window <= frames.size(); start += stride) {
    windows.push_back(frames.subspan(start, window));
  }
  return windows;
}

/// Cuts a long sequence into fixed-length labeled windows; timestamps kept.
inline std::vector<KeypointSequence> window_sequence(const KeypointSequence& seq, std::size_t window, std::size_t stride) {
  std::vector<KeypointSequence> out;
  for (auto view : window_stream(seq.frames, window, stride)) {
    KeypointSequence w;
    w.layout = seq.layout;
    w.fps = seq.fps;
    w.label = seq.label;
    w.classes = seq.classes;
    w.frames.assign(view.begin(), view.end());
    out.push_back(std::move(w));
  }
  return out;
}

/// round(x) with exact halves going down.
inline std::size_t round_half_down(double x) {
  const double r = std::ceil(x - 0.5);
  return r <= 0.0 ? 0 : static_cast<std::size_t>(r);
}

/// Stratified, seed-deterministic train/test partition. Each class keeps
/// round(train_fraction * count) sequences for training (halves round down).
/// Both parts preserve the input order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (ds.empty()) throw ContractError("cannot split an empty dataset");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ContractError("train_fraction must lie in [0, 1]");

  std::vector<bool> in_train(ds.size(), false);
  for (std::size_t k = 0; k < ds.classes.size(); ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.label_of(i) == k) members.push_back(i);
    }
    SplitMix64 rng(derive_seed(seed, k));
    shuffle_in_place(members, rng);
    const std::size_t n_train =
        std::min(members.size(), round_half_down(train_fraction * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < n_train; ++j) in_train[members[j]] = true;
  }

  Dataset train{ds.classes, {}};
  Dataset test{ds.classes, {}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_train[i] ? train : test).sequences.push_back(ds.sequences[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace kpaction
