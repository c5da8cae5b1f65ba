#include "splatmap/pyramid.hpp"

#include <stdexcept>

#include "splatmap/random.hpp"

namespace splatmap {

namespace {

PyramidLevel downsample(const PyramidLevel& src) {
  PyramidLevel dst;
  const int H = (src.rgb.height + 1) / 2;
  const int W = (src.rgb.width + 1) / 2;
  dst.rgb = Image(H, W, 3);
  dst.depth = Image(H, W, 1);
  dst.depth_valid.assign(static_cast<std::size_t>(H) * W, 0);
  dst.semantic = Image(H, W, 3);
  dst.labels.resize(static_cast<std::size_t>(H) * W);

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int sy0 = 2 * y, sx0 = 2 * x;
      // Box filter over the in-bounds part of the 2x2 block.
      double rgb[3] = {0, 0, 0};
      double depth_sum = 0.0;
      int n_px = 0, n_depth = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const int sy = sy0 + dy, sx = sx0 + dx;
          if (sy >= src.rgb.height || sx >= src.rgb.width) continue;
          ++n_px;
          for (int c = 0; c < 3; ++c) rgb[c] += src.rgb.at(sy, sx, c);
          const std::size_t spix =
              static_cast<std::size_t>(sy) * src.rgb.width + sx;
          if (src.depth_valid[spix]) {
            depth_sum += src.depth.at(sy, sx);
            ++n_depth;
          }
        }
      for (int c = 0; c < 3; ++c) dst.rgb.at(y, x, c) = rgb[c] / n_px;
      const std::size_t dpix = static_cast<std::size_t>(y) * W + x;
      if (n_depth > 0) {
        dst.depth.at(y, x) = depth_sum / n_depth;
        dst.depth_valid[dpix] = 1;
      }
      // Nearest neighbor keeps semantics on the palette.
      for (int c = 0; c < 3; ++c)
        dst.semantic.at(y, x, c) = src.semantic.at(sy0, sx0, c);
      dst.labels[dpix] =
          src.labels[static_cast<std::size_t>(sy0) * src.rgb.width + sx0];
    }
  }
  return dst;
}

}  // namespace

PyramidSet extract_pyramid(const FrameSet& frame, const Camera& intrinsics,
                           int n) {
  if (n < 1) throw std::invalid_argument("extract_pyramid: need n >= 1");
  if (frame.rgb.height != intrinsics.height ||
      frame.rgb.width != intrinsics.width)
    throw std::invalid_argument(
        "extract_pyramid: frame does not match camera dimensions");

  PyramidSet set;
  set.frame_id = frame.frame_id;
  set.levels.resize(n);

  PyramidLevel& base = set.levels[0];
  base.rgb = frame.rgb;
  base.depth = frame.depth;
  base.depth_valid = frame.depth_valid;
  base.semantic = frame.semantic;
  base.labels = frame.labels;
  base.camera = intrinsics;
  base.camera.pose_w2c = frame.pose_w2c;

  for (int i = 1; i < n; ++i) {
    set.levels[i] = downsample(set.levels[i - 1]);
    set.levels[i].camera = base.camera.at_level(i);
  }
  return set;
}

std::vector<double> LevelSchedule::probabilities(std::int64_t iteration) const {
  const int n = level_count;
  std::vector<double> p(n, 0.0);
  if (n == 1) {
    p[0] = 1.0;
    return p;
  }
  const double progress =
      total_iterations > 0
          ? static_cast<double>(iteration) / static_cast<double>(total_iterations)
          : 0.0;
  if (progress < 1.0 / 3.0) {
    const double rest = (1.0 - coarse_weight) / (n - 1);
    for (int i = 0; i < n - 1; ++i) p[i] = rest;
    p[n - 1] = coarse_weight;
  } else if (progress < 2.0 / 3.0) {
    for (int i = 0; i < n; ++i) p[i] = 1.0 / n;
  } else {
    const double rest = (1.0 - fine_weight) / (n - 1);
    p[0] = fine_weight;
    for (int i = 1; i < n; ++i) p[i] = rest;
  }
  return p;
}

int sample_level(const LevelSchedule& schedule, std::int64_t iteration,
                 std::mt19937_64& rng) {
  if (iteration < 0 || iteration >= schedule.total_iterations)
    throw std::out_of_range("sample_level: iteration out of range");
  const std::vector<double> p = schedule.probabilities(iteration);
  const double u = rand_uniform(rng);
  double cdf = 0.0;
  for (int i = 0; i < schedule.level_count; ++i) {
    cdf += p[i];
    if (u < cdf) return i;
  }
  return schedule.level_count - 1;
}

}  // namespace splatmap
