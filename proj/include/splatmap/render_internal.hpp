#pragma once

// Shared machinery between the forward rasterizer and the backward pass:
// per-view projected primitives and the tile binning. Not part of the
// public surface.

#include <cstdint>
#include <vector>

#include "splatmap/geometry.hpp"
#include "splatmap/primitive.hpp"
#include "splatmap/projection.hpp"

namespace splatmap::detail {

struct ViewData {
  std::vector<Projected2D> proj;
  std::vector<Vec3> rgb;                   // clamped view colors
  std::vector<Vec3> sem;
  std::vector<std::uint8_t> rgb_clamped;   // bit c set = channel c clamped
  std::vector<std::uint8_t> sem_clamped;
  std::vector<std::uint32_t> order;        // visible ids, (depth, id) sorted
  const GaussianMap* map = nullptr;

  double alpha_scale(std::uint32_t id) const {
    return map->primitives[id].opacity;
  }
};

struct TileBins {
  int tile_size = 16;
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::size_t> offsets;        // per tile, size tiles+1
  std::vector<std::uint32_t> entries;      // primitive ids, depth-sorted
};

ViewData prepare_view(const GaussianMap& map, const Camera& camera);
TileBins bin_to_tiles(const ViewData& view, const Camera& camera,
                      int tile_size);

}  // namespace splatmap::detail
