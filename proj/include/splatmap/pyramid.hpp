#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "splatmap/frame.hpp"
#include "splatmap/geometry.hpp"

namespace splatmap {

struct PyramidLevel {
  Image rgb;
  Image depth;
  Mask depth_valid;
  Image semantic;
  std::vector<std::int32_t> labels;
  Camera camera;   // intrinsics scaled to the level, pose of the frame
};

struct PyramidSet {
  int frame_id = 0;
  std::vector<PyramidLevel> levels;

  int level_count() const { return static_cast<int>(levels.size()); }
  const PyramidLevel& level(int i) const {
    if (i < 0 || i >= level_count())
      throw std::out_of_range("pyramid level " + std::to_string(i) +
                              " out of range (n=" +
                              std::to_string(level_count()) + ")");
    return levels[i];
  }
};

// n-level pyramid: level 0 is the raw frame, dimensions ceil-halve per
// level. RGB downsamples by 2x2 box filter, depth by masked mean over valid
// pixels (all-invalid block stays invalid), semantics by nearest neighbor
// (top-left of each block). intrinsics describes the frame's level-0 camera
// geometry; its pose is taken from the frame.
PyramidSet extract_pyramid(const FrameSet& frame, const Camera& intrinsics,
                           int n);

// Progress-weighted level sampling: coarse-heavy in the first third of
// training, uniform in the middle third, fine-heavy in the last.
struct LevelSchedule {
  std::int64_t total_iterations = 1;
  int level_count = 1;
  double coarse_weight = 0.6;   // coarsest-level weight early
  double fine_weight = 0.6;     // level-0 weight late

  // Probabilities over levels 0..n-1 at the given iteration; sums to 1.
  std::vector<double> probabilities(std::int64_t iteration) const;
};

int sample_level(const LevelSchedule& schedule, std::int64_t iteration,
                 std::mt19937_64& rng);

}  // namespace splatmap
