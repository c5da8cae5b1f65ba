#pragma once

#include <cstdint>
#include <vector>

#include "splatmap/geometry.hpp"
#include "splatmap/sh.hpp"

namespace splatmap {

// One isotropic 3D gaussian: position, scalar radius, opacity, and SH
// feature vectors for the RGB and semantic color channels. Feature layout is
// channel-major: coefficient k of channel c lives at index c * n_coeffs + k.
struct GaussianPrimitive {
  Vec3 position = Vec3::Zero();
  double radius = 0.01;          // world meters, > 0
  double opacity = 0.5;          // in [0, 1]
  std::vector<double> rgb_feature;
  std::vector<double> semantic_feature;
};

struct PrimitiveMeta {
  std::int32_t source_keyframe = -1;
  std::int32_t iteration_added = 0;
};

// One densify/prune epoch. Indices refer to the collection as it was just
// before the epoch; between epochs indices are stable.
struct CompactionEvent {
  std::int64_t iteration = 0;
  std::vector<std::uint32_t> removed;
  std::vector<std::uint32_t> cloned_from;
};

struct GaussianMap {
  int sh_degree_rgb = 0;
  int sh_degree_sem = 0;
  std::vector<GaussianPrimitive> primitives;
  std::vector<PrimitiveMeta> meta;
  std::vector<CompactionEvent> compactions;

  std::size_t size() const { return primitives.size(); }
  int rgb_feature_size() const { return 3 * sh_coeff_count(sh_degree_rgb); }
  int sem_feature_size() const { return 3 * sh_coeff_count(sh_degree_sem); }

  void add(GaussianPrimitive p, PrimitiveMeta m = {}) {
    primitives.push_back(std::move(p));
    meta.push_back(m);
  }
};

// Builds a primitive with constant (degree-0 compatible) colors. Higher
// order coefficients, if the map degree asks for them, are zero.
GaussianPrimitive make_primitive(const Vec3& position, double radius,
                                 double opacity, const Vec3& rgb,
                                 const Vec3& semantic_rgb, int sh_degree_rgb,
                                 int sh_degree_sem);

// O(N) invariant check; throws std::invalid_argument naming the first
// offending primitive index.
void validate_map(const GaussianMap& map);

}  // namespace splatmap
