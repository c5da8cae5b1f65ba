#include "splatmap/backward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "splatmap/parallel.hpp"
#include "splatmap/random.hpp"
#include "splatmap/render_internal.hpp"
#include "splatmap/sh.hpp"

namespace splatmap {

namespace {

// Raw per-primitive accumulators in screen space, before the projection
// chain rule.
struct RawAccum {
  Vec2 d_mu2d = Vec2::Zero();
  double d_r2d = 0.0;
  double d_depth = 0.0;     // upstream for the composited camera-z value
  double d_opacity = 0.0;
  Vec3 u_rgb = Vec3::Zero();   // sum of w * dL/dRGB over pixels
  Vec3 u_sem = Vec3::Zero();

  RawAccum& operator+=(const RawAccum& o) {
    d_mu2d += o.d_mu2d;
    d_r2d += o.d_r2d;
    d_depth += o.d_depth;
    d_opacity += o.d_opacity;
    u_rgb += o.u_rgb;
    u_sem += o.u_sem;
    return *this;
  }
};

}  // namespace

ParamGradients backward(const RenderOutput& output, const GaussianMap& map,
                        const Camera& camera, const RenderConfig& config,
                        const Image& d_rgb, const Image& d_depth,
                        const Image& d_semantic) {
  require_same_shape(output.rgb, d_rgb, "backward rgb gradient");
  require_same_shape(output.depth, d_depth, "backward depth gradient");
  require_same_shape(output.semantic, d_semantic, "backward semantic gradient");
  if (!config.record_contributors ||
      output.contributors.offsets.size() != output.rgb.pixel_count() + 1)
    throw std::invalid_argument(
        "backward: render output has no contributor records");

  const std::size_t n = map.size();
  const detail::ViewData view = detail::prepare_view(map, camera);
  const detail::TileBins bins =
      detail::bin_to_tiles(view, camera, config.tile_size);
  const int ts = config.tile_size;
  const std::int64_t n_tiles =
      static_cast<std::int64_t>(bins.tiles_x) * bins.tiles_y;

  // Phase 1: per-tile accumulation into local slots (one slot per tile
  // candidate), merged into global accumulators in tile order afterwards so
  // the result is independent of the thread count.
  std::vector<std::vector<RawAccum>> tile_accum(n_tiles);

  parallel_for(0, n_tiles, [&](std::int64_t t) {
    const std::size_t first = bins.offsets[t];
    const std::size_t n_cand = bins.offsets[t + 1] - first;
    if (n_cand == 0) return;
    const std::uint32_t* cand = bins.entries.data() + first;
    auto& local = tile_accum[t];
    local.assign(n_cand, RawAccum{});

    const int ty = static_cast<int>(t) / bins.tiles_x;
    const int tx = static_cast<int>(t) % bins.tiles_x;
    const int x0 = tx * ts, x1 = std::min(camera.width, x0 + ts);
    const int y0 = ty * ts, y1 = std::min(camera.height, y0 + ts);

    std::vector<double> alphas, trans;
    std::vector<std::size_t> slots;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * camera.width + x;
        const std::size_t beg = output.contributors.offsets[pix];
        const std::size_t cnt = output.contributors.offsets[pix + 1] - beg;
        if (cnt == 0) continue;

        // Replay the forward transmittance recursion from the recorded
        // weights: alpha_i = w_i / T_i, T_{i+1} = T_i - w_i. Contributors
        // are a depth-ordered subsequence of the tile candidate list, so a
        // single merge cursor recovers each one's local slot.
        alphas.resize(cnt);
        trans.resize(cnt);
        slots.resize(cnt);
        double T = 1.0;
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < cnt; ++i) {
          const std::uint32_t id = output.contributors.ids[beg + i];
          while (cursor < n_cand && cand[cursor] != id) ++cursor;
          slots[i] = cursor;
          const double w = output.contributors.weights[beg + i];
          trans[i] = T;
          alphas[i] = w / T;
          T -= w;
        }

        const double* gR = d_rgb.pixel(y, x);
        const double gD = d_depth.pixel(y, x)[0];
        const double* gS = d_semantic.pixel(y, x);

        // Suffix accumulators start from the background composited with
        // the final transmittance.
        Vec3 suf_rgb = T * config.background_rgb;
        Vec3 suf_sem = T * config.background_semantic;
        double suf_d = T * config.background_depth;

        for (std::size_t i = cnt; i-- > 0;) {
          const std::uint32_t id = output.contributors.ids[beg + i];
          const double w = output.contributors.weights[beg + i];
          const double alpha = alphas[i];
          const double Ti = trans[i];
          RawAccum& acc = local[slots[i]];
          const Vec3& ci = view.rgb[id];
          const Vec3& si = view.sem[id];
          const double di = view.proj[id].depth;

          acc.u_rgb += w * Vec3(gR[0], gR[1], gR[2]);
          acc.u_sem += w * Vec3(gS[0], gS[1], gS[2]);
          acc.d_depth += w * gD;

          const double inv_om = 1.0 / (1.0 - alpha);
          double d_alpha = 0.0;
          for (int c = 0; c < 3; ++c) {
            d_alpha += gR[c] * (ci[c] * Ti - suf_rgb[c] * inv_om);
            d_alpha += gS[c] * (si[c] * Ti - suf_sem[c] * inv_om);
          }
          d_alpha += gD * (di * Ti - suf_d * inv_om);

          // Sub-gradient 0 once the per-primitive alpha is clamped.
          if (alpha < config.alpha_clamp * (1.0 - 1e-12)) {
            const Projected2D& pr = view.proj[id];
            const double o = view.alpha_scale(id);
            const Vec2 diff(x - pr.mu2d.x(), y - pr.mu2d.y());
            const double r2 = pr.r2d * pr.r2d;
            acc.d_opacity += d_alpha * (alpha / o);
            acc.d_mu2d += d_alpha * alpha / r2 * diff;
            acc.d_r2d += d_alpha * alpha * diff.squaredNorm() / (r2 * pr.r2d);
          }

          suf_rgb += w * ci;
          suf_sem += w * si;
          suf_d += w * di;
        }
      }
    }
  });

  // Phase 2: ordered merge.
  std::vector<RawAccum> global(n);
  for (std::int64_t t = 0; t < n_tiles; ++t) {
    if (tile_accum[t].empty()) continue;
    const std::uint32_t* cand = bins.entries.data() + bins.offsets[t];
    for (std::size_t s = 0; s < tile_accum[t].size(); ++s)
      global[cand[s]] += tile_accum[t][s];
  }

  // Phase 3: chain through projection and SH per primitive.
  ParamGradients grads;
  grads.position.assign(n, Vec3::Zero());
  grads.radius.assign(n, 0.0);
  grads.opacity.assign(n, 0.0);
  const int frgb = map.rgb_feature_size();
  const int fsem = map.sem_feature_size();
  grads.rgb_feature.assign(n * frgb, 0.0);
  grads.semantic_feature.assign(n * fsem, 0.0);

  const Vec3 cam_center = camera.center_world();
  const int krgb = sh_coeff_count(map.sh_degree_rgb);
  const int ksem = sh_coeff_count(map.sh_degree_sem);
  const int max_deg = std::max(map.sh_degree_rgb, map.sh_degree_sem);

  parallel_for(0, static_cast<std::int64_t>(n), [&](std::int64_t i) {
    if (!view.proj[i].visible) return;
    const RawAccum& acc = global[i];
    const GaussianPrimitive& p = map.primitives[i];

    grads.opacity[i] = acc.d_opacity;

    const ProjectionGrad pg = project_gradients(
        p, camera, acc.d_mu2d, acc.d_r2d, acc.d_depth);
    grads.position[i] = pg.d_position;
    grads.radius[i] = pg.d_radius;

    double basis[9];
    Vec3 dir = Vec3::UnitZ();
    double len = 1.0;
    if (max_deg > 0) {
      const Vec3 off = p.position - cam_center;
      len = off.norm();
      dir = len > 0 ? Vec3(off / len) : Vec3::UnitZ();
    }
    sh_basis(max_deg, dir, basis);

    Vec3 d_dir = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
      if (!(view.rgb_clamped[i] & (1u << c))) {
        for (int k = 0; k < krgb; ++k)
          grads.rgb_feature[i * frgb + c * krgb + k] = acc.u_rgb[c] * basis[k];
      }
      if (!(view.sem_clamped[i] & (1u << c))) {
        for (int k = 0; k < ksem; ++k)
          grads.semantic_feature[i * fsem + c * ksem + k] =
              acc.u_sem[c] * basis[k];
      }
    }

    // View-dependent colors feed position through the viewing direction.
    if (max_deg > 0) {
      Vec3 bgrad[9];
      sh_basis_dir_grad(max_deg, dir, bgrad);
      for (int c = 0; c < 3; ++c) {
        if (!(view.rgb_clamped[i] & (1u << c)))
          for (int k = 1; k < krgb; ++k)
            d_dir += acc.u_rgb[c] * p.rgb_feature[c * krgb + k] * bgrad[k];
        if (!(view.sem_clamped[i] & (1u << c)))
          for (int k = 1; k < ksem; ++k)
            d_dir += acc.u_sem[c] * p.semantic_feature[c * ksem + k] * bgrad[k];
      }
      const Mat3 jac =
          (Mat3::Identity() - dir * dir.transpose()) / std::max(len, 1e-12);
      grads.position[i] += jac.transpose() * d_dir;
    }
  });

  return grads;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

namespace {

struct CheckScene {
  GaussianMap map;
  Camera camera;
  RenderConfig config;
  Image d_rgb, d_depth, d_semantic;
};

CheckScene make_check_scene(std::uint64_t seed, int size, int n_primitives,
                            int deg_rgb, int deg_sem) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 1);
  CheckScene s;
  s.camera.width = size;
  s.camera.height = size;
  s.camera.fx = s.camera.fy = 1.25 * size;
  s.camera.cx = 0.5 * (size - 1);
  s.camera.cy = 0.5 * (size - 1);

  s.map.sh_degree_rgb = deg_rgb;
  s.map.sh_degree_sem = deg_sem;
  const int krgb = sh_coeff_count(deg_rgb);
  const int ksem = sh_coeff_count(deg_sem);
  for (int i = 0; i < n_primitives; ++i) {
    const double z = rand_uniform(rng, 1.5, 3.0);
    const double half = 0.35 * z;   // keep inside the frustum
    GaussianPrimitive p;
    p.position = Vec3(rand_uniform(rng, -half, half),
                      rand_uniform(rng, -half, half), z);
    p.radius = rand_uniform(rng, 0.05, 0.15);
    p.opacity = rand_uniform(rng, 0.15, 0.85);
    p.rgb_feature.assign(3 * krgb, 0.0);
    p.semantic_feature.assign(3 * ksem, 0.0);
    for (int c = 0; c < 3; ++c) {
      p.rgb_feature[c * krgb] = sh_dc_from_value(rand_uniform(rng, 0.2, 0.8));
      p.semantic_feature[c * ksem] =
          sh_dc_from_value(rand_uniform(rng, 0.2, 0.8));
      for (int k = 1; k < krgb; ++k)
        p.rgb_feature[c * krgb + k] = rand_uniform(rng, -0.15, 0.15);
      for (int k = 1; k < ksem; ++k)
        p.semantic_feature[c * ksem + k] = rand_uniform(rng, -0.15, 0.15);
    }
    s.map.add(std::move(p), {});
  }

  // Non-zero backgrounds so the residual-transmittance path is exercised.
  s.config.background_rgb = Vec3(0.25, 0.35, 0.15);
  s.config.background_semantic = Vec3(0.2, 0.2, 0.6);
  s.config.background_depth = 0.7;

  s.d_rgb = Image(size, size, 3);
  s.d_depth = Image(size, size, 1);
  s.d_semantic = Image(size, size, 3);
  for (double& v : s.d_rgb.data) v = rand_uniform(rng, -1.0, 1.0);
  for (double& v : s.d_depth.data) v = rand_uniform(rng, -1.0, 1.0);
  for (double& v : s.d_semantic.data) v = rand_uniform(rng, -1.0, 1.0);
  return s;
}

// Structural fingerprint of a render: contribution counts plus clamp
// counts per pixel. Two renders with equal signatures lie on the same
// smooth piece of the forward function.
std::vector<std::uint32_t> signature(const RenderOutput& out,
                                     const RenderConfig& cfg) {
  const std::size_t n_pix = out.rgb.pixel_count();
  std::vector<std::uint32_t> sig(2 * n_pix);
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    const std::size_t beg = out.contributors.offsets[pix];
    const std::size_t cnt = out.contributors.offsets[pix + 1] - beg;
    sig[2 * pix] = static_cast<std::uint32_t>(cnt);
    std::uint32_t clamped = 0;
    double T = 1.0;
    for (std::size_t i = 0; i < cnt; ++i) {
      const double w = out.contributors.weights[beg + i];
      const double alpha = w / T;
      T -= w;
      if (alpha >= cfg.alpha_clamp * (1.0 - 1e-9)) ++clamped;
    }
    sig[2 * pix + 1] = clamped;
  }
  return sig;
}

double probe_loss(const RenderOutput& out, const CheckScene& s) {
  double loss = 0.0;
  for (std::size_t i = 0; i < out.rgb.data.size(); ++i)
    loss += out.rgb.data[i] * s.d_rgb.data[i];
  for (std::size_t i = 0; i < out.depth.data.size(); ++i)
    loss += out.depth.data[i] * s.d_depth.data[i];
  for (std::size_t i = 0; i < out.semantic.data.size(); ++i)
    loss += out.semantic.data[i] * s.d_semantic.data[i];
  return loss;
}

}  // namespace

GradCheckReport check_gradients(std::uint64_t seed, int size,
                                int n_primitives, double tolerance,
                                int sh_degree_rgb, int sh_degree_sem) {
  CheckScene s =
      make_check_scene(seed, size, n_primitives, sh_degree_rgb, sh_degree_sem);

  const RenderOutput out = render(s.map, s.camera, s.config);
  const ParamGradients analytic = backward(out, s.map, s.camera, s.config,
                                           s.d_rgb, s.d_depth, s.d_semantic);

  GradCheckReport report;
  report.seed = seed;
  report.size = size;
  report.n_primitives = n_primitives;
  report.tolerance = tolerance;
  report.classes = {{"position", 0, 0, 0},
                    {"radius", 0, 0, 0},
                    {"opacity", 0, 0, 0},
                    {"rgb_feature", 0, 0, 0},
                    {"semantic_feature", 0, 0, 0}};

  const double h = 1e-4;
  const std::vector<std::uint32_t> base_sig = signature(out, s.config);
  auto fd_probe = [&](double* param, double analytic_grad, GradCheckClass& cls) {
    const double saved = *param;
    *param = saved + h;
    const RenderOutput plus = render(s.map, s.camera, s.config);
    *param = saved - h;
    const RenderOutput minus = render(s.map, s.camera, s.config);
    *param = saved;
    if (signature(plus, s.config) != base_sig ||
        signature(minus, s.config) != base_sig) {
      ++cls.excluded;
      return;
    }
    const double fd = (probe_loss(plus, s) - probe_loss(minus, s)) / (2.0 * h);
    const double err = std::abs(fd - analytic_grad);
    if (err < 1e-6) {   // absolute floor
      ++cls.checked;
      return;
    }
    const double rel = err / std::max(std::abs(fd), std::abs(analytic_grad));
    cls.max_rel_err = std::max(cls.max_rel_err, rel);
    ++cls.checked;
  };

  const int frgb = s.map.rgb_feature_size();
  const int fsem = s.map.sem_feature_size();
  for (std::size_t i = 0; i < s.map.size(); ++i) {
    GaussianPrimitive& p = s.map.primitives[i];
    for (int a = 0; a < 3; ++a)
      fd_probe(&p.position[a], analytic.position[i][a], report.classes[0]);
    fd_probe(&p.radius, analytic.radius[i], report.classes[1]);
    fd_probe(&p.opacity, analytic.opacity[i], report.classes[2]);
    for (int k = 0; k < frgb; ++k)
      fd_probe(&p.rgb_feature[k], analytic.rgb_feature[i * frgb + k],
               report.classes[3]);
    for (int k = 0; k < fsem; ++k)
      fd_probe(&p.semantic_feature[k], analytic.semantic_feature[i * fsem + k],
               report.classes[4]);
  }

  report.passed = true;
  for (const auto& c : report.classes)
    if (c.max_rel_err >= tolerance) report.passed = false;
  return report;
}

std::string GradCheckReport::summary() const {
  char line[256];
  std::snprintf(line, sizeof(line),
                "gradcheck seed=%llu size=%dx%d primitives=%d tol=%g: %s\n",
                static_cast<unsigned long long>(seed), size, size,
                n_primitives, tolerance, passed ? "PASS" : "FAIL");
  std::string out = line;
  for (const auto& c : classes) {
    std::snprintf(line, sizeof(line),
                  "  %-18s max_rel_err=%.3e checked=%d excluded_boundary=%d\n",
                  c.name.c_str(), c.max_rel_err, c.checked, c.excluded);
    out += line;
  }
  return out;
}

}  // namespace splatmap
