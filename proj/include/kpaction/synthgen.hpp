#pragma once

// Synthetic keypoint windows with known ground truth.
//
// "payment": the right wrist makes a raised-cosine reach to a card reader
// while the body walks past it. "evasion": the same walk with both arms in a
// small horizontal swing. The order-probe set pairs two sub-gestures in
// opposite orders so that any time-pooled feature is uninformative.
//
// Landmark indices follow the 33-point pose topology (11/12 shoulders,
// 13/14 elbows, 15/16 wrists, 17-22 hand points, 23/24 hips). Only arm and
// hip landmarks move; all other slots hold a fixed rest pose. Every value
// gets i.i.d. Gaussian noise.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "kpaction/error.hpp"
#include "kpaction/keypoints.hpp"
#include "kpaction/rng.hpp"

namespace kpaction::synth {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct GestureSpec {
  Point2 reader_position{0.42, 0.42};
  /// Fraction of the rest-to-reader distance covered at the peak of the reach.
  double arc_amplitude = 1.0;
  std::size_t duration_frames = 30;
  double noise_sigma = 0.01;
  /// Normalized image units per frame.
  double walk_speed = 0.01;
};

struct SynthConfig {
  LandmarkLayout layout = LandmarkLayout::pose_only();
  double fps = 10.0;
  std::size_t window = 30;
  GestureSpec gesture;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ContractError("fps must be positive");
    if (window != gesture.duration_frames) throw ContractError("window must equal duration_frames");
    if (gesture.duration_frames < 2) throw ContractError("duration_frames must be >= 2");
    if (!(gesture.noise_sigma >= 0.0) || !std::isfinite(gesture.noise_sigma)) throw ContractError("noise_sigma must be >= 0");
    const auto& r = gesture.reader_position;
    if (!(r.x >= 0.0 && r.x <= 1.0 && r.y >= 0.0 && r.y <= 1.0)) throw ContractError("reader_position must lie in [0,1]^2");
    if (!(gesture.arc_amplitude >= 0.0) || !std::isfinite(gesture.arc_amplitude)) throw ContractError("arc_amplitude must be >= 0");
    if (!std::isfinite(gesture.walk_speed)) throw ContractError("walk_speed must be finite");
    const auto pose = layout.find_segment("pose");
    if (!pose) throw ContractError("synthetic layouts need a 'pose' segment");
    const auto& seg = layout.segments()[*pose];
    if (seg.landmark_count < 25 || seg.values_per_landmark < 2) {
      throw ContractError("'pose' segment needs >= 25 landmarks with >= 2 values");
    }
  }
};

inline const std::vector<std::string>& gesture_classes() {
  static const std::vector<std::string> classes{"payment", "evasion"};
  return classes;
}

inline const std::vector<std::string>& order_probe_classes() {
  static const std::vector<std::string> classes{"right_then_left", "left_then_right"};
  return classes;
}

namespace pose {
inline constexpr std::size_t kLeftShoulder = 11, kRightShoulder = 12;
inline constexpr std::size_t kLeftElbow = 13, kRightElbow = 14;
inline constexpr std::size_t kLeftWrist = 15, kRightWrist = 16;
inline constexpr std::size_t kLeftHip = 23, kRightHip = 24;
}  // namespace pose

namespace detail {

// Rest pose: x relative to the body centre, y absolute.
inline constexpr std::array<Point2, 33> kRestPose{{
    {0.0, 0.15},     {0.01, 0.14},   {0.02, 0.14},    {0.03, 0.14},   {-0.01, 0.14},  {-0.02, 0.14},  {-0.03, 0.14},
    {0.045, 0.15},   {-0.045, 0.15}, {0.012, 0.18},   {-0.012, 0.18}, {0.08, 0.30},   {-0.08, 0.30},  {0.10, 0.45},
    {-0.10, 0.45},   {0.10, 0.60},   {-0.10, 0.60},   {0.105, 0.63},  {-0.105, 0.63}, {0.10, 0.635},  {-0.10, 0.635},
    {0.09, 0.62},    {-0.09, 0.62},  {0.05, 0.60},    {-0.05, 0.60},  {0.05, 0.78},   {-0.05, 0.78},  {0.05, 0.95},
    {-0.05, 0.95},   {0.05, 0.97},   {-0.05, 0.97},   {0.06, 0.98},   {-0.06, 0.98},
}};

/// Per-sequence variation, drawn identically for every class so that
/// payment/evasion windows sharing an rng stream share the walk.
struct Variation {
  double jitter_x;
  double speed_scale;
  double shift_y;
  double swing_phase;
  double swing_amplitude;
};

inline Variation draw_variation(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Variation v{};
  v.jitter_x = rng.uniform(-0.02, 0.02);
  v.speed_scale = rng.uniform(0.85, 1.15);
  v.shift_y = rng.uniform(-0.015, 0.015);
  v.swing_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  v.swing_amplitude = rng.uniform(0.015, 0.03);
  return v;
}

/// Landmark positions of one frame, before they are written into a layout.
struct PoseFrame {
  std::array<Point2, 33> points;
};

inline PoseFrame rest_frame(double body_x, double shift_y) {
  PoseFrame f;
  for (std::size_t i = 0; i < 33; ++i) f.points[i] = {body_x + kRestPose[i].x, kRestPose[i].y};
  // Moving groups get the per-sequence vertical offset; the rest stays put.
  for (std::size_t i = pose::kLeftShoulder; i <= pose::kRightHip; ++i) f.points[i].y += shift_y;
  return f;
}

/// Moves a wrist and drags its elbow and hand points along.
inline void place_wrist(PoseFrame& f, bool right, Point2 wrist) {
  const std::size_t s = right ? pose::kRightShoulder : pose::kLeftShoulder;
  const std::size_t e = right ? pose::kRightElbow : pose::kLeftElbow;
  const std::size_t w = right ? pose::kRightWrist : pose::kLeftWrist;
  const Point2 old = f.points[w];
  f.points[w] = wrist;
  for (std::size_t h = w + 2; h <= 22; h += 2) {
    f.points[h].x += wrist.x - old.x;
    f.points[h].y += wrist.y - old.y;
  }
  const double side = right ? -1.0 : 1.0;
  f.points[e] = {0.5 * (f.points[s].x + wrist.x) + side * 0.02, 0.5 * (f.points[s].y + wrist.y) + 0.02};
}

/// Raised-cosine profile over [0, T-1] that is exactly 1 at frame T/2 and 0 at both ends.
inline double reach_profile(std::size_t t, std::size_t frames) {
  const std::size_t mid = frames / 2;
  if (t <= mid) return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(mid)));
  const std::size_t tail = frames - 1 - mid;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(frames - 1 - t) / static_cast<double>(tail)));
}

/// Writes pose (and hand segments, when present) into a flat vector.
inline std::vector<double> render(const LandmarkLayout& layout, const PoseFrame& f, const std::array<Point2, 33>& fixed) {
  std::vector<double> out(layout.total_dim(), 0.0);
  std::size_t offset = 0;
  for (const auto& seg : layout.segments()) {
    const std::size_t vpl = seg.values_per_landmark;
    for (std::size_t l = 0; l < seg.landmark_count; ++l) {
      double* v = out.data() + offset + l * vpl;
      Point2 p{};
      if (seg.name == "pose") {
        p = l < 33 ? f.points[l] : fixed[l % 33];
        if (vpl >= 4) v[3] = 1.0;  // visibility
      } else if (seg.name == "right_hand" || seg.name == "left_hand") {
        const Point2 wrist = f.points[seg.name == "right_hand" ? pose::kRightWrist : pose::kLeftWrist];
        p = {wrist.x + 0.004 * (static_cast<double>(l % 5) - 2.0), wrist.y + 0.005 * static_cast<double>(l / 5 + 1)};
      } else {
        // Face and any other block: a fixed ellipse around the rest-pose head.
        const double a = 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(seg.landmark_count);
        const double r = 0.3 + 0.7 * static_cast<double>(l % 7) / 6.0;
        p = {fixed[0].x + 0.04 * r * std::cos(a), fixed[0].y + 0.05 * r * std::sin(a)};
      }
      if (vpl >= 1) v[0] = p.x;
      if (vpl >= 2) v[1] = p.y;
    }
    offset += seg.landmark_count * vpl;
  }
  return out;
}

inline void add_noise(std::vector<double>& values, double sigma, SplitMix64& rng) {
  if (sigma == 0.0) return;
  for (double& v : values) v += sigma * rng.gaussian();
}

enum class Walker { payment, evasion };

inline KeypointSequence generate_walk(const SynthConfig& cfg, std::uint64_t rng_stream, Walker kind) {
  cfg.validate();
  const std::uint64_t base = derive_seed(cfg.seed, rng_stream);
  const Variation var = draw_variation(derive_seed(base, 0));
  SplitMix64 noise(derive_seed(base, 1));

  const auto& g = cfg.gesture;
  const std::size_t frames = g.duration_frames;
  const double speed = g.walk_speed * var.speed_scale;
  const double mid = static_cast<double>(frames / 2);
  // The right wrist's rest x sits at the reader's x at the mid-frame.
  const double centre_at_mid = g.reader_position.x + 0.10 + var.jitter_x;
  const double swing_period = std::max(2.0, cfg.fps);

  std::array<Point2, 33> fixed{};
  for (std::size_t i = 0; i < 33; ++i) fixed[i] = {g.reader_position.x + 0.10 + kRestPose[i].x, kRestPose[i].y};

  KeypointSequence seq;
  seq.layout = cfg.layout;
  seq.fps = cfg.fps;
  seq.classes = gesture_classes();
  seq.label = kind == Walker::payment ? 0 : 1;
  seq.frames.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double td = static_cast<double>(t);
    const double body_x = centre_at_mid + speed * (td - mid);
    PoseFrame f = rest_frame(body_x, var.shift_y);
    for (std::size_t i = 0; i < 33; ++i) {
      if (i < pose::kLeftShoulder || i > pose::kRightHip) f.points[i] = fixed[i];
    }
    const double bob = 0.005 * std::sin(4.0 * std::numbers::pi * td / swing_period);
    f.points[pose::kLeftHip].y += bob;
    f.points[pose::kRightHip].y += bob;

    const double swing = var.swing_amplitude * std::sin(var.swing_phase + 2.0 * std::numbers::pi * td / swing_period);
    const Point2 left_rest = f.points[pose::kLeftWrist];
    place_wrist(f, false, {left_rest.x + swing, left_rest.y});

    const Point2 right_rest = f.points[pose::kRightWrist];
    if (kind == Walker::payment) {
      const double s = reach_profile(t, frames) * g.arc_amplitude;
      const double dx = g.reader_position.x - right_rest.x;
      const double dy = g.reader_position.y - right_rest.y;
      const double len = std::hypot(dx, dy);
      // Outward bulge that vanishes at both ends and at the peak.
      const double bulge = len > 0.0 ? 0.12 * s * (1.0 - s) : 0.0;
      const double nx = len > 0.0 ? -dy / len : 0.0;
      const double ny = len > 0.0 ? dx / len : 0.0;
      place_wrist(f, true, {right_rest.x + s * dx + bulge * nx, right_rest.y + s * dy + bulge * ny});
    } else {
      place_wrist(f, true, {right_rest.x - swing, right_rest.y});
    }

    FrameVector fv;
    fv.timestamp_s = td / cfg.fps;
    fv.features = render(cfg.layout, f, fixed);
    add_noise(fv.features, g.noise_sigma, noise);
    seq.frames.push_back(std::move(fv));
  }
  return seq;
}

/// Rounds to a multiple of 2^-20 so that sums over a window are exact and
/// therefore independent of summation order.
inline double quantize(double v) { return std::nearbyint(v * 0x1.0p20) * 0x1.0p-20; }

}  // namespace detail

inline KeypointSequence generate_payment_sequence(const SynthConfig& cfg, std::uint64_t rng_stream) {
  return detail::generate_walk(cfg, rng_stream, detail::Walker::payment);
}

inline KeypointSequence generate_evasion_sequence(const SynthConfig& cfg, std::uint64_t rng_stream) {
  return detail::generate_walk(cfg, rng_stream, detail::Walker::evasion);
}

/// n_per_class payment windows followed by n_per_class evasion windows.
inline Dataset generate_dataset(const SynthConfig& cfg, std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class == 0) throw ContractError("n_per_class must be >= 1");
  SynthConfig c = cfg;
  c.seed = seed;
  c.validate();
  Dataset ds;
  ds.classes = gesture_classes();
  ds.sequences.reserve(2 * n_per_class);
  for (std::size_t i = 0; i < n_per_class; ++i) ds.sequences.push_back(generate_payment_sequence(c, 2 * i));
  for (std::size_t i = 0; i < n_per_class; ++i) ds.sequences.push_back(generate_evasion_sequence(c, 2 * i + 1));
  return ds;
}

/// Pair i of the probe set: (right-raise then left-raise, left-raise then right-raise).
/// Before noise both members hold the same multiset of frames.
inline std::pair<KeypointSequence, KeypointSequence> generate_order_probe_pair(const SynthConfig& cfg, std::uint64_t pair_index) {
  cfg.validate();
  const std::size_t frames = cfg.gesture.duration_frames;
  if (frames % 2 != 0) throw ContractError("order-probe windows need an even frame count");
  const std::size_t half = frames / 2;

  const std::uint64_t base = derive_seed(derive_seed(cfg.seed, 0x70726f6265ULL), pair_index);
  const detail::Variation var = detail::draw_variation(derive_seed(base, 0));
  const double body_x = 0.5 + var.jitter_x;
  std::array<Point2, 33> fixed{};
  for (std::size_t i = 0; i < 33; ++i) fixed[i] = {0.5 + detail::kRestPose[i].x, detail::kRestPose[i].y};

  auto segment = [&](bool right) {
    std::vector<std::vector<double>> out;
    for (std::size_t j = 0; j < half; ++j) {
      const double s = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(half + 1)));
      detail::PoseFrame f = detail::rest_frame(body_x, var.shift_y);
      for (std::size_t i = 0; i < 33; ++i) {
        if (i < pose::kLeftShoulder || i > pose::kRightHip) f.points[i] = fixed[i];
      }
      const std::size_t w = right ? pose::kRightWrist : pose::kLeftWrist;
      const Point2 rest = f.points[w];
      detail::place_wrist(f, right, {rest.x, rest.y - 0.25 * var.speed_scale * s});
      auto values = detail::render(cfg.layout, f, fixed);
      for (double& v : values) v = detail::quantize(v);
      out.push_back(std::move(values));
    }
    return out;
  };
  const auto right_seg = segment(true);
  const auto left_seg = segment(false);

  auto assemble = [&](std::size_t label, const auto& first, const auto& second, std::uint64_t noise_stream) {
    SplitMix64 noise(derive_seed(base, noise_stream));
    KeypointSequence seq;
    seq.layout = cfg.layout;
    seq.fps = cfg.fps;
    seq.classes = order_probe_classes();
    seq.label = label;
    for (std::size_t t = 0; t < frames; ++t) {
      FrameVector fv;
      fv.timestamp_s = static_cast<double>(t) / cfg.fps;
      fv.features = t < half ? first[t] : second[t - half];
      detail::add_noise(fv.features, cfg.gesture.noise_sigma, noise);
      seq.frames.push_back(std::move(fv));
    }
    return seq;
  };
  return {assemble(0, right_seg, left_seg, 1), assemble(1, left_seg, right_seg, 2)};
}

/// n_per_class pairs; class 0 members first, then class 1 in the same pair order.
inline Dataset generate_order_probe_dataset(const SynthConfig& cfg, std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class == 0) throw ContractError("n_per_class must be >= 1");
  SynthConfig c = cfg;
  c.seed = seed;
  Dataset ds;
  ds.classes = order_probe_classes();
  std::vector<KeypointSequence> second;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    auto [a, b] = generate_order_probe_pair(c, i);
    ds.sequences.push_back(std::move(a));
    second.push_back(std::move(b));
  }
  for (auto& s : second) ds.sequences.push_back(std::move(s));
  return ds;
}

}  // namespace kpaction::synth
