#include "splatmap/primitive.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace splatmap {

GaussianPrimitive make_primitive(const Vec3& position, double radius,
                                 double opacity, const Vec3& rgb,
                                 const Vec3& semantic_rgb, int sh_degree_rgb,
                                 int sh_degree_sem) {
  GaussianPrimitive p;
  p.position = position;
  p.radius = radius;
  p.opacity = opacity;
  p.rgb_feature.assign(3 * sh_coeff_count(sh_degree_rgb), 0.0);
  p.semantic_feature.assign(3 * sh_coeff_count(sh_degree_sem), 0.0);
  const int nr = sh_coeff_count(sh_degree_rgb);
  const int ns = sh_coeff_count(sh_degree_sem);
  for (int c = 0; c < 3; ++c) {
    p.rgb_feature[c * nr] = sh_dc_from_value(rgb[c]);
    p.semantic_feature[c * ns] = sh_dc_from_value(semantic_rgb[c]);
  }
  return p;
}

namespace {
[[noreturn]] void fail(std::size_t index, const std::string& what) {
  throw std::invalid_argument("gaussian map: primitive " +
                              std::to_string(index) + ": " + what);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}
}  // namespace

void validate_map(const GaussianMap& map) {
  if (map.sh_degree_rgb < 0 || map.sh_degree_rgb > kShMaxDegree ||
      map.sh_degree_sem < 0 || map.sh_degree_sem > kShMaxDegree)
    throw std::invalid_argument("gaussian map: SH degree out of range [0,2]");
  if (map.meta.size() != map.primitives.size())
    throw std::invalid_argument("gaussian map: metadata size mismatch");
  const std::size_t frgb = static_cast<std::size_t>(map.rgb_feature_size());
  const std::size_t fsem = static_cast<std::size_t>(map.sem_feature_size());
  for (std::size_t i = 0; i < map.primitives.size(); ++i) {
    const GaussianPrimitive& p = map.primitives[i];
    if (!p.position.allFinite()) fail(i, "non-finite position");
    if (!std::isfinite(p.radius) || !(p.radius > 0.0))
      fail(i, "radius must be positive and finite");
    if (!std::isfinite(p.opacity) || p.opacity < 0.0 || p.opacity > 1.0)
      fail(i, "opacity must be in [0,1]");
    if (p.rgb_feature.size() != frgb)
      fail(i, "rgb feature size does not match the map SH degree");
    if (p.semantic_feature.size() != fsem)
      fail(i, "semantic feature size does not match the map SH degree");
    if (!all_finite(p.rgb_feature) || !all_finite(p.semantic_feature))
      fail(i, "non-finite feature coefficient");
  }
}

}  // namespace splatmap
