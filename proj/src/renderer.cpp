#include "splatmap/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatmap/parallel.hpp"
#include "splatmap/render_internal.hpp"
#include "splatmap/sh.hpp"

namespace splatmap {

namespace detail {

ViewData prepare_view(const GaussianMap& map, const Camera& camera) {
  ViewData view;
  view.map = &map;
  const std::size_t n = map.size();
  view.proj.resize(n);
  view.rgb.resize(n);
  view.sem.resize(n);
  view.rgb_clamped.assign(n, 0);
  view.sem_clamped.assign(n, 0);

  const Vec3 cam_center = camera.center_world();
  const int krgb = sh_coeff_count(map.sh_degree_rgb);
  const int ksem = sh_coeff_count(map.sh_degree_sem);

  parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
    const GaussianPrimitive& p = map.primitives[i];
    view.proj[i] = project(p, camera);
    if (!view.proj[i].visible) return;

    double basis[9];
    Vec3 dir = Vec3::UnitZ();
    const int max_deg = std::max(map.sh_degree_rgb, map.sh_degree_sem);
    if (max_deg > 0) {
      dir = p.position - cam_center;
      const double len = dir.norm();
      dir = len > 0 ? Vec3(dir / len) : Vec3::UnitZ();
    }
    sh_basis(max_deg, dir, basis);

    std::uint8_t cmask = 0;
    for (int c = 0; c < 3; ++c) {
      double v = 0.5;
      for (int k = 0; k < krgb; ++k) v += basis[k] * p.rgb_feature[c * krgb + k];
      if (v < 0.0 || v > 1.0) cmask |= static_cast<std::uint8_t>(1u << c);
      view.rgb[i][c] = std::clamp(v, 0.0, 1.0);
    }
    view.rgb_clamped[i] = cmask;
    cmask = 0;
    for (int c = 0; c < 3; ++c) {
      double v = 0.5;
      for (int k = 0; k < ksem; ++k)
        v += basis[k] * p.semantic_feature[c * ksem + k];
      if (v < 0.0 || v > 1.0) cmask |= static_cast<std::uint8_t>(1u << c);
      view.sem[i][c] = std::clamp(v, 0.0, 1.0);
    }
    view.sem_clamped[i] = cmask;
  });

  view.order.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    if (view.proj[i].visible) view.order.push_back(i);
  std::sort(view.order.begin(), view.order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              if (view.proj[a].depth != view.proj[b].depth)
                return view.proj[a].depth < view.proj[b].depth;
              return a < b;  // depth ties broken by id for determinism
            });
  return view;
}

TileBins bin_to_tiles(const ViewData& view, const Camera& camera,
                      int tile_size) {
  TileBins bins;
  bins.tile_size = tile_size;
  bins.tiles_x = (camera.width + tile_size - 1) / tile_size;
  bins.tiles_y = (camera.height + tile_size - 1) / tile_size;
  const std::size_t n_tiles =
      static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y;

  // Pixel-center bounding box of the 3-sigma disk, then covered tiles.
  auto tile_range = [&](std::uint32_t id, int& tx0, int& tx1, int& ty0,
                        int& ty1) {
    const Projected2D& pr = view.proj[id];
    const double support = kSupportSigmas * pr.r2d;
    const int x0 = std::max(0, static_cast<int>(std::ceil(pr.mu2d.x() - support)));
    const int x1 = std::min(camera.width - 1,
                            static_cast<int>(std::floor(pr.mu2d.x() + support)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(pr.mu2d.y() - support)));
    const int y1 = std::min(camera.height - 1,
                            static_cast<int>(std::floor(pr.mu2d.y() + support)));
    if (x0 > x1 || y0 > y1) return false;
    tx0 = x0 / tile_size;
    tx1 = x1 / tile_size;
    ty0 = y0 / tile_size;
    ty1 = y1 / tile_size;
    return true;
  };

  std::vector<std::size_t> counts(n_tiles, 0);
  for (std::uint32_t id : view.order) {
    int tx0, tx1, ty0, ty1;
    if (!tile_range(id, tx0, tx1, ty0, ty1)) continue;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        ++counts[static_cast<std::size_t>(ty) * bins.tiles_x + tx];
  }
  bins.offsets.assign(n_tiles + 1, 0);
  std::partial_sum(counts.begin(), counts.end(), bins.offsets.begin() + 1);
  bins.entries.resize(bins.offsets.back());

  // Filling in global sorted order keeps every per-tile list depth-sorted.
  std::vector<std::size_t> cursor(bins.offsets.begin(),
                                  bins.offsets.end() - 1);
  for (std::uint32_t id : view.order) {
    int tx0, tx1, ty0, ty1;
    if (!tile_range(id, tx0, tx1, ty0, ty1)) continue;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx) {
        const std::size_t t = static_cast<std::size_t>(ty) * bins.tiles_x + tx;
        bins.entries[cursor[t]++] = id;
      }
  }
  return bins;
}

}  // namespace detail

namespace {

using detail::ViewData;

// Front-to-back compositing of one pixel over a depth-sorted candidate
// list. Shared between the tiled and naive renderers so their semantics
// cannot drift apart. Sink receives (id, weight) per kept contribution.
template <typename Sink>
inline void composite_pixel(const ViewData& view, const std::uint32_t* cand,
                            std::size_t n_cand, double px, double py,
                            const RenderConfig& cfg, double floor,
                            double* rgb, double* depth, double* sem,
                            double* transmittance, Sink&& sink) {
  Vec3 acc_rgb = Vec3::Zero();
  Vec3 acc_sem = Vec3::Zero();
  double acc_depth = 0.0;
  double T = 1.0;
  for (std::size_t k = 0; k < n_cand; ++k) {
    const std::uint32_t id = cand[k];
    const Projected2D& pr = view.proj[id];
    const double dx = px - pr.mu2d.x();
    const double dy = py - pr.mu2d.y();
    const double dist2 = dx * dx + dy * dy;
    const double support = kSupportSigmas * pr.r2d;
    if (dist2 > support * support) continue;
    const double g = std::exp(-dist2 / (2.0 * pr.r2d * pr.r2d));
    const double alpha = std::min(cfg.alpha_clamp, view.alpha_scale(id) * g);
    if (alpha < cfg.alpha_cutoff) continue;
    const double w = alpha * T;
    acc_rgb += w * view.rgb[id];
    acc_sem += w * view.sem[id];
    acc_depth += w * pr.depth;
    sink(id, w);
    T -= w;
    if (T < floor) break;
  }
  for (int c = 0; c < 3; ++c) {
    rgb[c] = acc_rgb[c] + T * cfg.background_rgb[c];
    sem[c] = acc_sem[c] + T * cfg.background_semantic[c];
  }
  *depth = acc_depth + T * cfg.background_depth;
  *transmittance = T;
}

struct NullSink {
  void operator()(std::uint32_t, double) const {}
};

RenderOutput make_output(const Camera& camera) {
  RenderOutput out;
  out.rgb = Image(camera.height, camera.width, 3);
  out.depth = Image(camera.height, camera.width, 1);
  out.semantic = Image(camera.height, camera.width, 3);
  out.transmittance = Image(camera.height, camera.width, 1);
  return out;
}

}  // namespace

RenderOutput render(const GaussianMap& map, const Camera& camera,
                    const RenderConfig& config) {
  config.validate();
  camera.validate();
  RenderOutput out = make_output(camera);

  const ViewData view = detail::prepare_view(map, camera);
  const detail::TileBins bins =
      detail::bin_to_tiles(view, camera, config.tile_size);
  const int ts = config.tile_size;
  const std::int64_t n_tiles =
      static_cast<std::int64_t>(bins.tiles_x) * bins.tiles_y;

  // Per-tile contributor staging; pixels within a tile are visited in
  // row-major order so each tile's flat list is already grouped by pixel.
  struct TileRecords {
    std::vector<std::uint32_t> ids;
    std::vector<double> weights;
    std::vector<std::uint32_t> pixel_counts;
  };
  std::vector<TileRecords> staged(config.record_contributors ? n_tiles : 0);

  parallel_for(0, n_tiles, [&](std::int64_t t) {
    const int ty = static_cast<int>(t) / bins.tiles_x;
    const int tx = static_cast<int>(t) % bins.tiles_x;
    const int x0 = tx * ts, x1 = std::min(camera.width, x0 + ts);
    const int y0 = ty * ts, y1 = std::min(camera.height, y0 + ts);
    const std::uint32_t* cand = bins.entries.data() + bins.offsets[t];
    const std::size_t n_cand = bins.offsets[t + 1] - bins.offsets[t];

    TileRecords* rec = config.record_contributors ? &staged[t] : nullptr;
    if (rec) rec->pixel_counts.reserve(static_cast<std::size_t>(ts) * ts);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        std::size_t before = rec ? rec->ids.size() : 0;
        auto sink = [&](std::uint32_t id, double w) {
          if (rec) {
            rec->ids.push_back(id);
            rec->weights.push_back(w);
          }
        };
        composite_pixel(view, cand, n_cand, x, y, config,
                        config.transmittance_floor, out.rgb.pixel(y, x),
                        out.depth.pixel(y, x), out.semantic.pixel(y, x),
                        out.transmittance.pixel(y, x), sink);
        if (rec)
          rec->pixel_counts.push_back(
              static_cast<std::uint32_t>(rec->ids.size() - before));
      }
    }
  });

  if (config.record_contributors) {
    // Assemble the global CSR: per-pixel counts (disjoint writes), serial
    // scan, then per-tile copies into disjoint ranges.
    const std::size_t n_pix = out.rgb.pixel_count();
    out.contributors.offsets.assign(n_pix + 1, 0);
    parallel_for(0, n_tiles, [&](std::int64_t t) {
      const int ty = static_cast<int>(t) / bins.tiles_x;
      const int tx = static_cast<int>(t) % bins.tiles_x;
      const int x0 = tx * ts, x1 = std::min(camera.width, x0 + ts);
      const int y0 = ty * ts, y1 = std::min(camera.height, y0 + ts);
      std::size_t k = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          out.contributors.offsets[static_cast<std::size_t>(y) * camera.width +
                                   x + 1] = staged[t].pixel_counts[k++];
    });
    for (std::size_t i = 1; i <= n_pix; ++i)
      out.contributors.offsets[i] += out.contributors.offsets[i - 1];
    out.contributors.ids.resize(out.contributors.offsets.back());
    out.contributors.weights.resize(out.contributors.offsets.back());
    parallel_for(0, n_tiles, [&](std::int64_t t) {
      const int ty = static_cast<int>(t) / bins.tiles_x;
      const int tx = static_cast<int>(t) % bins.tiles_x;
      const int x0 = tx * ts, x1 = std::min(camera.width, x0 + ts);
      const int y0 = ty * ts, y1 = std::min(camera.height, y0 + ts);
      std::size_t k = 0;
      std::size_t src = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const std::size_t pix = static_cast<std::size_t>(y) * camera.width + x;
          std::size_t dst = out.contributors.offsets[pix];
          const std::uint32_t c = staged[t].pixel_counts[k++];
          for (std::uint32_t j = 0; j < c; ++j, ++src, ++dst) {
            out.contributors.ids[dst] = staged[t].ids[src];
            out.contributors.weights[dst] = staged[t].weights[src];
          }
        }
    });
  } else {
    out.contributors.offsets.assign(out.rgb.pixel_count() + 1, 0);
  }
  return out;
}

RenderOutput render_naive(const GaussianMap& map, const Camera& camera,
                          const RenderConfig& config) {
  config.validate();
  camera.validate();
  RenderOutput out = make_output(camera);
  const ViewData view = detail::prepare_view(map, camera);

  const std::size_t n_pix = out.rgb.pixel_count();
  out.contributors.offsets.assign(n_pix + 1, 0);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * camera.width + x;
      auto sink = [&](std::uint32_t id, double w) {
        if (!config.record_contributors) return;
        out.contributors.ids.push_back(id);
        out.contributors.weights.push_back(w);
      };
      composite_pixel(view, view.order.data(), view.order.size(), x, y,
                      config, /*floor=*/0.0, out.rgb.pixel(y, x),
                      out.depth.pixel(y, x), out.semantic.pixel(y, x),
                      out.transmittance.pixel(y, x), sink);
      out.contributors.offsets[pix + 1] = out.contributors.ids.size();
    }
  }
  return out;
}

int max_pyramid_depth(int width, int height) {
  int depth = 1;
  int m = std::max(width, height);
  while (m > 1) {
    m = (m + 1) / 2;
    ++depth;
  }
  return depth;
}

RenderOutput render_at_level(const GaussianMap& map, const Camera& camera,
                             int level, const RenderConfig& config) {
  if (level < 0 || level >= max_pyramid_depth(camera.width, camera.height))
    throw std::out_of_range("render_at_level: level " + std::to_string(level) +
                            " out of range");
  return render(map, camera.at_level(level), config);
}

}  // namespace splatmap
