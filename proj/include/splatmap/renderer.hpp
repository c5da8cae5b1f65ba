#pragma once

#include <cstdint>
#include <vector>

#include "splatmap/geometry.hpp"
#include "splatmap/image.hpp"
#include "splatmap/primitive.hpp"
#include "splatmap/projection.hpp"

namespace splatmap {

struct RenderConfig {
  int tile_size = 16;
  double alpha_cutoff = 1.0 / 255.0;
  double alpha_clamp = 0.999;
  double transmittance_floor = 1e-4;
  Vec3 background_rgb = Vec3::Zero();
  double background_depth = 0.0;
  Vec3 background_semantic = Vec3::Zero();
  bool record_contributors = true;

  void validate() const {
    if (!(0.0 < alpha_cutoff && alpha_cutoff < alpha_clamp &&
          alpha_clamp <= 1.0))
      throw std::invalid_argument(
          "render config: need 0 < alpha_cutoff < alpha_clamp <= 1");
    if (tile_size < 1)
      throw std::invalid_argument("render config: tile_size must be >= 1");
    if (transmittance_floor < 0.0)
      throw std::invalid_argument(
          "render config: transmittance_floor must be >= 0");
  }
};

// Per-pixel (primitive id, composited weight) records in ascending depth
// order, CSR layout over row-major pixels.
struct ContributorList {
  std::vector<std::size_t> offsets;   // pixel_count + 1
  std::vector<std::uint32_t> ids;
  std::vector<double> weights;

  std::size_t count(std::size_t pixel) const {
    return offsets[pixel + 1] - offsets[pixel];
  }
};

struct RenderOutput {
  Image rgb;            // H x W x 3
  Image depth;          // H x W x 1, meters
  Image semantic;       // H x W x 3
  Image transmittance;  // H x W x 1
  ContributorList contributors;
};

// Tile-binned, depth-sorted, front-to-back alpha compositing over the
// primitives whose 3-sigma footprint touches a pixel. Deterministic: output
// is bit-identical for any thread count.
RenderOutput render(const GaussianMap& map, const Camera& camera,
                    const RenderConfig& config);

// Reference renderer: every pixel walks the full depth-sorted primitive
// list, no tiling, no early termination (transmittance_floor treated as 0).
// Single-threaded. Per-contribution semantics are shared with render().
RenderOutput render_naive(const GaussianMap& map, const Camera& camera,
                          const RenderConfig& config);

// render() with the camera scaled to a pyramid level (see Camera::at_level).
// level must be non-negative and within the camera's pyramid depth.
RenderOutput render_at_level(const GaussianMap& map, const Camera& camera,
                             int level, const RenderConfig& config);

// Levels available before the ceil-halved image degenerates to 1x1.
int max_pyramid_depth(int width, int height);

}  // namespace splatmap
