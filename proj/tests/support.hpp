#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kpaction/keypoints.hpp"
#include "kpaction/rng.hpp"

namespace kpaction::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("kpaction_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A value with a wide spread of magnitudes and awkward decimal expansions.
inline double awkward_value(SplitMix64& rng) {
  switch (rng.below(5)) {
    case 0: return rng.uniform(-1.0, 1.0);
    case 1: return std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(200)) - 100);
    case 2: return static_cast<double>(static_cast<std::int64_t>(rng.below(2000)) - 1000);
    case 3: return 0.0;
    default: return rng.gaussian() * 1e6;
  }
}

inline LandmarkLayout random_layout(SplitMix64& rng) {
  std::vector<LandmarkSegment> segs;
  const std::size_t n = 1 + rng.below(3);
  for (std::size_t i = 0; i < n; ++i) {
    segs.push_back({"seg" + std::to_string(i), 1 + rng.below(4), 1 + rng.below(4)});
  }
  return LandmarkLayout(std::move(segs));
}

inline KeypointSequence random_sequence(SplitMix64& rng) {
  KeypointSequence s;
  s.layout = random_layout(rng);
  s.fps = rng.uniform(1.0, 60.0);
  const std::size_t frames = rng.below(6);
  double t = rng.uniform(0.0, 2.0);
  for (std::size_t i = 0; i < frames; ++i) {
    FrameVector f;
    f.timestamp_s = t;
    t += rng.uniform(1e-6, 0.5);
    for (std::size_t d = 0; d < s.layout.total_dim(); ++d) f.features.push_back(awkward_value(rng));
    s.frames.push_back(std::move(f));
  }
  if (rng.below(2)) {
    s.classes = std::vector<std::string>{"payment", "evasion", "other \"quoted\""};
    if (rng.below(2)) s.label = rng.below(3);
  }
  return s;
}

/// A labeled sequence of `frames` frames with Gaussian features.
inline KeypointSequence gaussian_sequence(const LandmarkLayout& layout, std::size_t frames, std::size_t label,
                                          const std::vector<std::string>& classes, SplitMix64& rng) {
  KeypointSequence s;
  s.layout = layout;
  s.classes = classes;
  s.label = label;
  for (std::size_t i = 0; i < frames; ++i) {
    FrameVector f;
    f.timestamp_s = 0.1 * static_cast<double>(i);
    for (std::size_t d = 0; d < layout.total_dim(); ++d) f.features.push_back(rng.gaussian());
    s.frames.push_back(std::move(f));
  }
  return s;
}

}  // namespace kpaction::testing
