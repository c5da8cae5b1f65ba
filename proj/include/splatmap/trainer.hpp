#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "splatmap/frame.hpp"
#include "splatmap/losses.hpp"
#include "splatmap/pyramid.hpp"
#include "splatmap/renderer.hpp"

namespace splatmap {

struct LearningRates {
  double position = 2e-4;          // scaled by scene extent
  double radius = 5e-3;
  double opacity = 5e-2;
  double rgb_feature = 2.5e-3;
  double semantic_feature = 2.5e-3;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct DensifyConfig {
  std::int64_t interval = 300;     // 0 disables
  std::int64_t start = 300;
  double grad_threshold = 5e-3;    // mean |position gradient| to clone
  double prune_opacity = 0.05;
  double prune_radius_factor = 0.5;   // of scene extent
};

struct TrainConfig {
  std::int64_t iterations = 2000;
  std::uint64_t seed = 1;
  int pyramid_levels = 3;
  double lambda_rgb = 0.2;
  double lambda_semantic = 0.2;
  std::int64_t steps_per_keyframe = 100;
  bool seed_from_keyframes = true;
  int seed_stride = 4;
  double scene_extent = 0.0;       // 0 = derive from the map
  int sh_degree_rgb = 0;
  int sh_degree_sem = 0;
  double coarse_weight = 0.6;
  double fine_weight = 0.6;
  LearningRates lr;
  AdamParams adam;
  DensifyConfig densify;
  RenderConfig render;

  void validate() const;
  static TrainConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct Keyframe {
  FrameSet frame;
  PyramidSet pyramid;
};

struct KeyframeStore {
  std::vector<Keyframe> keyframes;

  std::size_t size() const { return keyframes.size(); }
  bool empty() const { return keyframes.empty(); }
  const Keyframe& operator[](std::size_t i) const { return keyframes[i]; }
};

struct TrainLogEntry {
  std::int64_t iteration = 0;
  int level = 0;
  double l_rgb = 0, l_depth = 0, l_semantic = 0, l_total = 0;
  std::size_t n_primitives = 0;
};

void write_log_jsonl(const std::filesystem::path& path,
                     const std::vector<TrainLogEntry>& log);

// Back-projects a stride grid of valid-depth pixels that the current map
// does not explain (rendered transmittance > 0.5 or depth error > 5 cm)
// into new primitives. Returns the number added.
std::size_t seed_from_keyframe(const FrameSet& frame, const Camera& intrinsics,
                               GaussianMap& map, int stride,
                               const RenderConfig& render_cfg,
                               std::int64_t iteration);

struct DensifyOutcome {
  std::size_t added = 0;
  std::size_t removed = 0;
  std::vector<std::uint32_t> kept;     // old indices surviving, in order
  std::vector<std::uint32_t> cloned;   // old indices that were cloned
};

// Prunes near-transparent or oversized primitives and clones those whose
// mean position-gradient magnitude exceeds the threshold (clones inherit
// the parent's parameters, jittered by half a radius). Records a
// compaction event on the map.
DensifyOutcome densify_and_prune(GaussianMap& map,
                                 const std::vector<double>& mean_position_grad,
                                 const DensifyConfig& cfg, double scene_extent,
                                 std::int64_t iteration, std::mt19937_64& rng);

// Owns the map and the optimizer state for a training run. One writer;
// rendering inside a step parallelizes over tiles.
class Trainer {
 public:
  Trainer(GaussianMap initial_map, Camera intrinsics, TrainConfig cfg);

  // Appends a keyframe (unique id required), extracts its pyramid, and
  // seeds primitives from it when the config asks for that.
  void add_keyframe(const FrameSet& frame);

  // One optimization iteration: sample keyframe and level, render, compute
  // the coupled loss, backpropagate, apply the adaptive-moment update.
  LossBreakdown step();

  // Prune transparent/oversized primitives and clone high-gradient ones.
  // Returns (added, removed).
  std::pair<std::size_t, std::size_t> densify_and_prune();
  bool densify_due() const;

  const GaussianMap& map() const { return map_; }
  GaussianMap take_map() { return std::move(map_); }
  const KeyframeStore& store() const { return store_; }
  std::int64_t iteration() const { return iteration_; }
  double scene_extent() const { return scene_extent_; }
  const std::vector<TrainLogEntry>& log() const { return log_; }

 private:
  struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
  };

  void grow_state(std::size_t old_n);
  void update_scene_extent();
  double adam_delta(AdamState& s, std::size_t i, double grad, double lr,
                    double bias1, double bias2) const;

  GaussianMap map_;
  Camera intrinsics_;
  TrainConfig cfg_;
  KeyframeStore store_;
  std::mt19937_64 rng_;
  std::int64_t iteration_ = 0;
  double scene_extent_ = 1.0;

  // Unconstrained reparameterization: opacity through a logistic, radius
  // through an exponential, so gradient steps keep the map invariants.
  std::vector<double> u_opacity_, u_radius_;

  AdamState st_position_, st_radius_, st_opacity_, st_rgb_, st_sem_;
  std::vector<double> grad_accum_;
  std::vector<std::int64_t> grad_count_;
  std::vector<TrainLogEntry> log_;
};

struct FitResult {
  GaussianMap map;
  std::vector<TrainLogEntry> log;
};

// The keyframe-stream training loop: seed on arrival, steps_per_keyframe
// iterations between arrivals, the remaining budget afterwards, periodic
// densify/prune. Throws on an empty stream.
FitResult fit(const std::vector<FrameSet>& stream, const Camera& intrinsics,
              const TrainConfig& cfg, GaussianMap initial_map = {});

}  // namespace splatmap
