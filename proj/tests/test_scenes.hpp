#pragma once

// Shared synthetic scenes, fixtures, and small helpers for the test suites.

#include <filesystem>
#include <random>
#include <string>

#include "splatmap/datasets.hpp"
#include "splatmap/frame.hpp"
#include "splatmap/random.hpp"
#include "splatmap/renderer.hpp"
#include "splatmap/sh.hpp"

namespace splatmap::testing {

inline Camera make_camera(int w, int h, double f) {
  Camera c;
  c.width = w;
  c.height = h;
  c.fx = c.fy = f;
  c.cx = 0.5 * (w - 1);
  c.cy = 0.5 * (h - 1);
  return c;
}

// Camera-to-world pose looking from eye toward target, world +y as the
// up hint.
inline RigidTransform lookat_c2w(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 up(0, 1, 0);
  if (std::abs(z.dot(up)) > 0.99) up = Vec3(1, 0, 0);
  const Vec3 x = up.cross(z).normalized();
  const Vec3 y = z.cross(x);
  RigidTransform c2w;
  c2w.rotation.col(0) = x;
  c2w.rotation.col(1) = y;
  c2w.rotation.col(2) = z;
  c2w.translation = eye;
  return c2w;
}

inline Palette a1_palette() {
  Palette p;
  p.entries = {{0, "void", {0, 0, 0}},
               {1, "red", {204, 51, 51}},
               {2, "green", {51, 204, 51}},
               {3, "blue", {51, 102, 204}},
               {4, "yellow", {204, 204, 51}}};
  return p;
}

struct A1Options {
  int width = 96;
  int height = 72;
  double focal = 90.0;
  int primitives_per_class = 50;
  int n_poses = 5;
  bool high_frequency_cluster = false;
  std::uint64_t seed = 7;
};

// The synthetic recovery scene: four colored primitive clusters around
// z ~= 2 m viewed from a short camera arc. Optionally adds a dense
// checkerboard-colored cluster of small primitives (high-frequency texture).
inline SyntheticSceneSpec make_a1_scene(const A1Options& opt = {}) {
  SyntheticSceneSpec spec;
  spec.width = opt.width;
  spec.height = opt.height;
  spec.fx = spec.fy = opt.focal;
  spec.cx = 0.5 * (opt.width - 1);
  spec.cy = 0.5 * (opt.height - 1);
  spec.palette = a1_palette();
  spec.map.sh_degree_rgb = 0;
  spec.map.sh_degree_sem = 0;

  std::mt19937_64 rng(opt.seed * 0x9e3779b97f4a7c15ull + 3);
  const Vec3 centers[4] = {Vec3(-0.33, -0.22, 2.0), Vec3(0.33, -0.22, 2.05),
                           Vec3(-0.33, 0.22, 1.95), Vec3(0.33, 0.22, 2.0)};
  for (int cls = 0; cls < 4; ++cls) {
    const Vec3 base = spec.palette.color01(cls + 1);
    for (int i = 0; i < opt.primitives_per_class; ++i) {
      Vec3 pos = centers[cls] + Vec3(0.11 * rand_normal(rng),
                                     0.09 * rand_normal(rng),
                                     0.05 * rand_normal(rng));
      Vec3 color = base;
      for (int c = 0; c < 3; ++c)
        color[c] = std::clamp(color[c] + rand_uniform(rng, -0.08, 0.08), 0.08,
                              0.92);
      spec.map.add(make_primitive(pos, rand_uniform(rng, 0.035, 0.06),
                                  rand_uniform(rng, 0.65, 0.95), color,
                                  spec.palette.color01(cls + 1), 0, 0));
      spec.primitive_labels.push_back(cls + 1);
    }
  }

  if (opt.high_frequency_cluster) {
    // 10x10 grid of small primitives with alternating colors, a fine
    // checker texture roughly 1.5 px at level 0.
    const Vec3 corner(-0.14, -0.03, 1.8);
    for (int gy = 0; gy < 10; ++gy)
      for (int gx = 0; gx < 10; ++gx) {
        const Vec3 pos = corner + Vec3(0.030 * gx, 0.030 * gy, 0.0);
        const bool odd = (gx + gy) % 2 != 0;
        const Vec3 color = odd ? Vec3(0.88, 0.88, 0.88) : Vec3(0.12, 0.12, 0.12);
        spec.map.add(make_primitive(pos, 0.013, 0.92, color,
                                    spec.palette.color01(4), 0, 0));
        spec.primitive_labels.push_back(4);
      }
  }

  const Vec3 target(0, 0, 2.0);
  for (int k = 0; k < opt.n_poses; ++k) {
    const double theta =
        opt.n_poses == 1 ? 0.0 : -0.28 + 0.56 * k / (opt.n_poses - 1);
    const Vec3 eye(2.0 * std::sin(theta), 0.12 * std::sin(2.3 * theta),
                   2.0 - 2.0 * std::cos(theta));
    spec.trajectory_c2w.push_back(lookat_c2w(eye, target));
  }
  return spec;
}

// Gaussian perturbation of every primitive parameter; sigmas in native
// units (meters, color value, opacity value).
inline void perturb_map(GaussianMap& map, std::uint64_t seed, double pos_sigma,
                        double color_sigma, double opacity_sigma) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 5);
  const int krgb = sh_coeff_count(map.sh_degree_rgb);
  const int ksem = sh_coeff_count(map.sh_degree_sem);
  for (auto& p : map.primitives) {
    for (int a = 0; a < 3; ++a) p.position[a] += pos_sigma * rand_normal(rng);
    for (int c = 0; c < 3; ++c) {
      p.rgb_feature[c * krgb] += color_sigma * rand_normal(rng) / kShC0;
      p.semantic_feature[c * ksem] += color_sigma * rand_normal(rng) / kShC0;
    }
    p.opacity =
        std::clamp(p.opacity + opacity_sigma * rand_normal(rng), 0.06, 0.98);
  }
}

// In-memory ground-truth frames rendered with the reference renderer (no
// 8-bit quantization). Semantic pixels snap to the palette like the
// on-disk generator does.
inline std::vector<FrameSet> render_gt_frames(const SyntheticSceneSpec& spec) {
  RenderConfig cfg;
  cfg.record_contributors = false;
  std::vector<FrameSet> frames;
  for (std::size_t k = 0; k < spec.trajectory_c2w.size(); ++k) {
    Camera cam;
    cam.fx = spec.fx;
    cam.fy = spec.fy;
    cam.cx = spec.cx;
    cam.cy = spec.cy;
    cam.width = spec.width;
    cam.height = spec.height;
    cam.pose_w2c = spec.trajectory_c2w[k].inverse();
    const RenderOutput out = render_naive(spec.map, cam, cfg);

    FrameSet f;
    f.frame_id = static_cast<int>(k);
    f.pose_w2c = cam.pose_w2c;
    f.rgb = out.rgb;
    f.depth = out.depth;
    f.depth_valid.assign(out.depth.pixel_count(), 0);
    for (std::size_t i = 0; i < out.depth.data.size(); ++i)
      if (out.depth.data[i] > 1e-6) f.depth_valid[i] = 1;
    f.semantic = Image(spec.height, spec.width, 3);
    f.labels.resize(out.semantic.pixel_count());
    for (std::size_t pix = 0; pix < out.semantic.pixel_count(); ++pix) {
      const double* s = out.semantic.data.data() + pix * 3;
      const int idx = spec.palette.snap(Vec3(s[0], s[1], s[2]));
      const Vec3 color = spec.palette.color01(idx);
      for (int c = 0; c < 3; ++c) f.semantic.data[pix * 3 + c] = color[c];
      f.labels[pix] = spec.palette.entries[idx].id;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

inline Camera spec_camera(const SyntheticSceneSpec& spec) {
  Camera cam;
  cam.fx = spec.fx;
  cam.fy = spec.fy;
  cam.cx = spec.cx;
  cam.cy = spec.cy;
  cam.width = spec.width;
  cam.height = spec.height;
  return cam;
}

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("splatmap_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace splatmap::testing
