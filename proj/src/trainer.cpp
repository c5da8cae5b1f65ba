#include "splatmap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "splatmap/backward.hpp"
#include "splatmap/random.hpp"
#include "splatmap/sh.hpp"

#include <nlohmann/json.hpp>

namespace splatmap {

using nlohmann::json;

void TrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("config: iterations < 0");
  if (pyramid_levels < 1)
    throw std::invalid_argument("config: pyramid_levels must be >= 1");
  if (lambda_rgb < 0 || lambda_rgb > 1 || lambda_semantic < 0 ||
      lambda_semantic > 1)
    throw std::invalid_argument("config: lambda values must be in [0,1]");
  for (double rate : {lr.position, lr.radius, lr.opacity, lr.rgb_feature,
                      lr.semantic_feature})
    if (rate < 0) throw std::invalid_argument("config: negative learning rate");
  if (seed_stride < 1)
    throw std::invalid_argument("config: seed_stride must be >= 1");
  render.validate();
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: " + path.string() + ": " + e.what());
  }

  TrainConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.seed = j.value("seed", c.seed);
  c.pyramid_levels = j.value("pyramid_levels", c.pyramid_levels);
  c.lambda_rgb = j.value("lambda_rgb", c.lambda_rgb);
  c.lambda_semantic = j.value("lambda_semantic", c.lambda_semantic);
  c.steps_per_keyframe = j.value("steps_per_keyframe", c.steps_per_keyframe);
  c.seed_from_keyframes = j.value("seed_from_keyframes", c.seed_from_keyframes);
  c.seed_stride = j.value("seed_stride", c.seed_stride);
  c.scene_extent = j.value("scene_extent", c.scene_extent);
  c.sh_degree_rgb = j.value("sh_degree_rgb", c.sh_degree_rgb);
  c.sh_degree_sem = j.value("sh_degree_sem", c.sh_degree_sem);
  if (j.contains("schedule")) {
    c.coarse_weight = j["schedule"].value("coarse_weight", c.coarse_weight);
    c.fine_weight = j["schedule"].value("fine_weight", c.fine_weight);
  }
  if (j.contains("learning_rates")) {
    const auto& l = j["learning_rates"];
    c.lr.position = l.value("position", c.lr.position);
    c.lr.radius = l.value("radius", c.lr.radius);
    c.lr.opacity = l.value("opacity", c.lr.opacity);
    c.lr.rgb_feature = l.value("rgb_feature", c.lr.rgb_feature);
    c.lr.semantic_feature = l.value("semantic_feature", c.lr.semantic_feature);
  }
  if (j.contains("adam")) {
    c.adam.beta1 = j["adam"].value("beta1", c.adam.beta1);
    c.adam.beta2 = j["adam"].value("beta2", c.adam.beta2);
    c.adam.epsilon = j["adam"].value("epsilon", c.adam.epsilon);
  }
  if (j.contains("densify")) {
    const auto& d = j["densify"];
    c.densify.interval = d.value("interval", c.densify.interval);
    c.densify.start = d.value("start", c.densify.start);
    c.densify.grad_threshold = d.value("grad_threshold", c.densify.grad_threshold);
    c.densify.prune_opacity = d.value("prune_opacity", c.densify.prune_opacity);
    c.densify.prune_radius_factor =
        d.value("prune_radius_factor", c.densify.prune_radius_factor);
  }
  if (j.contains("render")) {
    const auto& r = j["render"];
    c.render.tile_size = r.value("tile_size", c.render.tile_size);
    c.render.alpha_cutoff = r.value("alpha_cutoff", c.render.alpha_cutoff);
    c.render.alpha_clamp = r.value("alpha_clamp", c.render.alpha_clamp);
    c.render.transmittance_floor =
        r.value("transmittance_floor", c.render.transmittance_floor);
    for (const char* key : {"background_rgb", "background_semantic"}) {
      if (!r.contains(key)) continue;
      Vec3 v(r[key].at(0).get<double>(), r[key].at(1).get<double>(),
             r[key].at(2).get<double>());
      if (std::string(key) == "background_rgb")
        c.render.background_rgb = v;
      else
        c.render.background_semantic = v;
    }
    c.render.background_depth =
        r.value("background_depth", c.render.background_depth);
  }
  c.validate();
  return c;
}

void TrainConfig::save(const std::filesystem::path& path) const {
  json j;
  j["iterations"] = iterations;
  j["seed"] = seed;
  j["pyramid_levels"] = pyramid_levels;
  j["lambda_rgb"] = lambda_rgb;
  j["lambda_semantic"] = lambda_semantic;
  j["steps_per_keyframe"] = steps_per_keyframe;
  j["seed_from_keyframes"] = seed_from_keyframes;
  j["seed_stride"] = seed_stride;
  j["scene_extent"] = scene_extent;
  j["sh_degree_rgb"] = sh_degree_rgb;
  j["sh_degree_sem"] = sh_degree_sem;
  j["schedule"] = {{"coarse_weight", coarse_weight},
                   {"fine_weight", fine_weight}};
  j["learning_rates"] = {{"position", lr.position},
                         {"radius", lr.radius},
                         {"opacity", lr.opacity},
                         {"rgb_feature", lr.rgb_feature},
                         {"semantic_feature", lr.semantic_feature}};
  j["adam"] = {{"beta1", adam.beta1},
               {"beta2", adam.beta2},
               {"epsilon", adam.epsilon}};
  j["densify"] = {{"interval", densify.interval},
                  {"start", densify.start},
                  {"grad_threshold", densify.grad_threshold},
                  {"prune_opacity", densify.prune_opacity},
                  {"prune_radius_factor", densify.prune_radius_factor}};
  j["render"] = {
      {"tile_size", render.tile_size},
      {"alpha_cutoff", render.alpha_cutoff},
      {"alpha_clamp", render.alpha_clamp},
      {"transmittance_floor", render.transmittance_floor},
      {"background_rgb",
       {render.background_rgb[0], render.background_rgb[1],
        render.background_rgb[2]}},
      {"background_depth", render.background_depth},
      {"background_semantic",
       {render.background_semantic[0], render.background_semantic[1],
        render.background_semantic[2]}}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_log_jsonl(const std::filesystem::path& path,
                     const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("log: cannot write " + path.string());
  for (const auto& e : log) {
    json j{{"iteration", e.iteration},   {"level", e.level},
           {"l_rgb", e.l_rgb},           {"l_depth", e.l_depth},
           {"l_semantic", e.l_semantic}, {"l_total", e.l_total},
           {"n_primitives", e.n_primitives}};
    out << j.dump() << "\n";
  }
}

std::size_t seed_from_keyframe(const FrameSet& frame, const Camera& intrinsics,
                               GaussianMap& map, int stride,
                               const RenderConfig& render_cfg,
                               std::int64_t iteration) {
  Camera cam = intrinsics;
  cam.pose_w2c = frame.pose_w2c;

  RenderConfig cfg = render_cfg;
  cfg.record_contributors = false;
  const RenderOutput out = render(map, cam, cfg);

  const RigidTransform c2w = cam.pose_w2c.inverse();
  const double fbar = cam.mean_focal();
  const int krgb = sh_coeff_count(map.sh_degree_rgb);
  const int ksem = sh_coeff_count(map.sh_degree_sem);

  std::size_t added = 0;
  for (int y = stride / 2; y < cam.height; y += stride) {
    for (int x = stride / 2; x < cam.width; x += stride) {
      const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
      if (!frame.depth_valid[pix]) continue;
      const double gt_depth = frame.depth.at(y, x);
      const bool unexplained =
          out.transmittance.at(y, x) > 0.5 ||
          std::abs(out.depth.at(y, x) - gt_depth) > 0.05;
      if (!unexplained) continue;

      const Vec3 ray((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      GaussianPrimitive p;
      p.position = c2w.apply(gt_depth * ray);
      p.radius = gt_depth * stride / fbar;
      p.opacity = 0.7;
      p.rgb_feature.assign(3 * krgb, 0.0);
      p.semantic_feature.assign(3 * ksem, 0.0);
      for (int c = 0; c < 3; ++c) {
        p.rgb_feature[c * krgb] = sh_dc_from_value(frame.rgb.at(y, x, c));
        p.semantic_feature[c * ksem] =
            sh_dc_from_value(frame.semantic.at(y, x, c));
      }
      map.add(std::move(p),
              {frame.frame_id, static_cast<std::int32_t>(iteration)});
      ++added;
    }
  }
  return added;
}

// ---------------------------------------------------------------------------

namespace {
double logit(double p) {
  const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return std::log(q / (1.0 - q));
}
double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }
}  // namespace

Trainer::Trainer(GaussianMap initial_map, Camera intrinsics, TrainConfig cfg)
    : map_(std::move(initial_map)),
      intrinsics_(std::move(intrinsics)),
      cfg_(std::move(cfg)),
      rng_(cfg_.seed * 0x9e3779b97f4a7c15ull + 11) {
  cfg_.validate();
  cfg_.render.record_contributors = true;
  if (map_.size() == 0) {
    map_.sh_degree_rgb = cfg_.sh_degree_rgb;
    map_.sh_degree_sem = cfg_.sh_degree_sem;
  }
  validate_map(map_);
  grow_state(0);
  update_scene_extent();
}

void Trainer::grow_state(std::size_t old_n) {
  const std::size_t n = map_.size();
  const std::size_t frgb = map_.rgb_feature_size();
  const std::size_t fsem = map_.sem_feature_size();
  u_opacity_.resize(n);
  u_radius_.resize(n);
  for (std::size_t i = old_n; i < n; ++i) {
    u_opacity_[i] = logit(map_.primitives[i].opacity);
    u_radius_[i] = std::log(map_.primitives[i].radius);
  }
  st_position_.m.resize(3 * n, 0.0);
  st_position_.v.resize(3 * n, 0.0);
  st_radius_.m.resize(n, 0.0);
  st_radius_.v.resize(n, 0.0);
  st_opacity_.m.resize(n, 0.0);
  st_opacity_.v.resize(n, 0.0);
  st_rgb_.m.resize(n * frgb, 0.0);
  st_rgb_.v.resize(n * frgb, 0.0);
  st_sem_.m.resize(n * fsem, 0.0);
  st_sem_.v.resize(n * fsem, 0.0);
  grad_accum_.resize(n, 0.0);
  grad_count_.resize(n, 0);
}

void Trainer::update_scene_extent() {
  if (cfg_.scene_extent > 0) {
    scene_extent_ = cfg_.scene_extent;
    return;
  }
  if (map_.size() == 0) {
    scene_extent_ = 1.0;
    return;
  }
  Vec3 lo = map_.primitives[0].position;
  Vec3 hi = lo;
  for (const auto& p : map_.primitives) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  scene_extent_ = std::max(0.5, (hi - lo).norm());
}

void Trainer::add_keyframe(const FrameSet& frame) {
  for (const auto& kf : store_.keyframes)
    if (kf.frame.frame_id == frame.frame_id)
      throw std::invalid_argument("trainer: duplicate keyframe id " +
                                  std::to_string(frame.frame_id));
  Keyframe kf;
  kf.frame = frame;
  kf.pyramid = extract_pyramid(frame, intrinsics_, cfg_.pyramid_levels);
  store_.keyframes.push_back(std::move(kf));

  if (cfg_.seed_from_keyframes) {
    const std::size_t old_n = map_.size();
    seed_from_keyframe(frame, intrinsics_, map_, cfg_.seed_stride, cfg_.render,
                       iteration_);
    if (map_.size() != old_n) {
      grow_state(old_n);
      update_scene_extent();
    }
  }
}

double Trainer::adam_delta(AdamState& s, std::size_t i, double grad, double lr,
                           double bias1, double bias2) const {
  s.m[i] = cfg_.adam.beta1 * s.m[i] + (1.0 - cfg_.adam.beta1) * grad;
  s.v[i] = cfg_.adam.beta2 * s.v[i] + (1.0 - cfg_.adam.beta2) * grad * grad;
  const double mhat = s.m[i] / bias1;
  const double vhat = s.v[i] / bias2;
  return lr * mhat / (std::sqrt(vhat) + cfg_.adam.epsilon);
}

LossBreakdown Trainer::step() {
  if (store_.empty())
    throw std::logic_error("trainer: step() with no keyframes");

  const std::size_t kf_idx = rand_index(rng_, store_.size());
  LevelSchedule schedule;
  schedule.total_iterations = std::max<std::int64_t>(1, cfg_.iterations);
  schedule.level_count = cfg_.pyramid_levels;
  schedule.coarse_weight = cfg_.coarse_weight;
  schedule.fine_weight = cfg_.fine_weight;
  const int level = sample_level(
      schedule, std::min(iteration_, schedule.total_iterations - 1), rng_);

  const Keyframe& kf = store_[kf_idx];
  const PyramidLevel& lvl = kf.pyramid.level(level);

  const RenderOutput out = render(map_, lvl.camera, cfg_.render);
  const ScalarLoss lr_rgb = loss_rgb(out.rgb, lvl.rgb, cfg_.lambda_rgb);
  const ScalarLoss lr_depth = loss_depth(out.depth, lvl.depth, lvl.depth_valid);
  const ScalarLoss lr_sem =
      loss_semantic(out.semantic, lvl.semantic, cfg_.lambda_semantic);
  const LossBreakdown breakdown =
      loss_total(lr_rgb, level, lr_depth, level, lr_sem, level,
                 cfg_.lambda_rgb, cfg_.lambda_semantic);

  const ParamGradients grads =
      backward(out, map_, lvl.camera, cfg_.render, lr_rgb.pixel_grad,
               lr_depth.pixel_grad, lr_sem.pixel_grad);

  // One shared step counter; each class keeps its own moment buffers.
  for (AdamState* s :
       {&st_position_, &st_radius_, &st_opacity_, &st_rgb_, &st_sem_})
    ++s->t;
  const double b1 = 1.0 - std::pow(cfg_.adam.beta1, st_position_.t);
  const double b2 = 1.0 - std::pow(cfg_.adam.beta2, st_position_.t);

  const std::size_t n = map_.size();
  const std::size_t frgb = map_.rgb_feature_size();
  const std::size_t fsem = map_.sem_feature_size();
  const double lr_pos = cfg_.lr.position * scene_extent_;
  for (std::size_t i = 0; i < n; ++i) {
    GaussianPrimitive& p = map_.primitives[i];
    for (int a = 0; a < 3; ++a) {
      const double d = adam_delta(st_position_, 3 * i + a,
                                  grads.position[i][a], lr_pos, b1, b2);
      if (d != 0.0) p.position[a] -= d;
    }
    // Chain through the reparameterizations: d/du_r = r * d/dr,
    // d/du_o = o(1-o) * d/do.
    const double g_ur = grads.radius[i] * p.radius;
    const double dr = adam_delta(st_radius_, i, g_ur, cfg_.lr.radius, b1, b2);
    if (dr != 0.0) {
      u_radius_[i] -= dr;
      p.radius = std::exp(u_radius_[i]);
    }
    const double g_uo = grads.opacity[i] * p.opacity * (1.0 - p.opacity);
    const double doo = adam_delta(st_opacity_, i, g_uo, cfg_.lr.opacity, b1, b2);
    if (doo != 0.0) {
      u_opacity_[i] -= doo;
      p.opacity = sigmoid(u_opacity_[i]);
    }
    for (std::size_t k = 0; k < frgb; ++k) {
      const double d = adam_delta(st_rgb_, i * frgb + k,
                                  grads.rgb_feature[i * frgb + k],
                                  cfg_.lr.rgb_feature, b1, b2);
      if (d != 0.0) p.rgb_feature[k] -= d;
    }
    for (std::size_t k = 0; k < fsem; ++k) {
      const double d = adam_delta(st_sem_, i * fsem + k,
                                  grads.semantic_feature[i * fsem + k],
                                  cfg_.lr.semantic_feature, b1, b2);
      if (d != 0.0) p.semantic_feature[k] -= d;
    }
    grad_accum_[i] += grads.position[i].norm();
    grad_count_[i] += 1;
  }

  TrainLogEntry entry{iteration_,        breakdown.level, breakdown.l_rgb,
                      breakdown.l_depth, breakdown.l_semantic,
                      breakdown.l_total, map_.size()};
  log_.push_back(entry);
  ++iteration_;
  return breakdown;
}

bool Trainer::densify_due() const {
  const auto& d = cfg_.densify;
  return d.interval > 0 && iteration_ >= d.start &&
         iteration_ % d.interval == 0;
}

DensifyOutcome densify_and_prune(GaussianMap& map,
                                 const std::vector<double>& mean_position_grad,
                                 const DensifyConfig& cfg, double scene_extent,
                                 std::int64_t iteration, std::mt19937_64& rng) {
  const std::size_t n = map.size();
  if (mean_position_grad.size() != n)
    throw std::invalid_argument(
        "densify_and_prune: gradient magnitudes do not match the map size");

  DensifyOutcome outcome;
  CompactionEvent event;
  event.iteration = iteration;
  const double max_radius = cfg.prune_radius_factor * scene_extent;

  GaussianMap next;
  next.sh_degree_rgb = map.sh_degree_rgb;
  next.sh_degree_sem = map.sh_degree_sem;
  next.compactions = std::move(map.compactions);

  for (std::size_t i = 0; i < n; ++i) {
    const GaussianPrimitive& p = map.primitives[i];
    if (p.opacity < cfg.prune_opacity || p.radius > max_radius) {
      event.removed.push_back(static_cast<std::uint32_t>(i));
      ++outcome.removed;
      continue;
    }
    outcome.kept.push_back(static_cast<std::uint32_t>(i));
    next.add(map.primitives[i], map.meta[i]);
    if (mean_position_grad[i] > cfg.grad_threshold)
      outcome.cloned.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::uint32_t i : outcome.cloned) {
    GaussianPrimitive p = map.primitives[i];
    // Clone inherits the parent's parameters, offset by half a radius.
    Vec3 dir(rand_normal(rng), rand_normal(rng), rand_normal(rng));
    const double len = dir.norm();
    if (len > 0) p.position += 0.5 * p.radius * (dir / len);
    event.cloned_from.push_back(i);
    next.add(std::move(p),
             {map.meta[i].source_keyframe, static_cast<std::int32_t>(iteration)});
    ++outcome.added;
  }

  next.compactions.push_back(std::move(event));
  map = std::move(next);
  return outcome;
}

std::pair<std::size_t, std::size_t> Trainer::densify_and_prune() {
  const std::size_t n = map_.size();
  std::vector<double> means(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    means[i] = grad_count_[i] > 0
                   ? grad_accum_[i] / static_cast<double>(grad_count_[i])
                   : 0.0;

  const DensifyOutcome outcome = splatmap::densify_and_prune(
      map_, means, cfg_.densify, scene_extent_, iteration_, rng_);

  // Remap the optimizer state: gather survivors, zero moments for clones.
  const std::size_t frgb = map_.rgb_feature_size();
  const std::size_t fsem = map_.sem_feature_size();
  std::vector<double> new_uo, new_ur;
  AdamState np, nr, no, ng, ns;
  np.t = st_position_.t;
  nr.t = st_radius_.t;
  no.t = st_opacity_.t;
  ng.t = st_rgb_.t;
  ns.t = st_sem_.t;
  auto gather = [](AdamState& dst, const AdamState& src, std::size_t i,
                   std::size_t width, bool zero) {
    for (std::size_t k = 0; k < width; ++k) {
      dst.m.push_back(zero ? 0.0 : src.m[i * width + k]);
      dst.v.push_back(zero ? 0.0 : src.v[i * width + k]);
    }
  };
  auto append_state = [&](std::uint32_t i, bool zero_moments) {
    new_uo.push_back(u_opacity_[i]);
    new_ur.push_back(u_radius_[i]);
    gather(np, st_position_, i, 3, zero_moments);
    gather(nr, st_radius_, i, 1, zero_moments);
    gather(no, st_opacity_, i, 1, zero_moments);
    gather(ng, st_rgb_, i, frgb, zero_moments);
    gather(ns, st_sem_, i, fsem, zero_moments);
  };
  for (std::uint32_t i : outcome.kept) append_state(i, false);
  for (std::uint32_t i : outcome.cloned) append_state(i, true);

  u_opacity_ = std::move(new_uo);
  u_radius_ = std::move(new_ur);
  st_position_ = std::move(np);
  st_radius_ = std::move(nr);
  st_opacity_ = std::move(no);
  st_rgb_ = std::move(ng);
  st_sem_ = std::move(ns);
  grad_accum_.assign(map_.size(), 0.0);
  grad_count_.assign(map_.size(), 0);
  return {outcome.added, outcome.removed};
}

FitResult fit(const std::vector<FrameSet>& stream, const Camera& intrinsics,
              const TrainConfig& cfg, GaussianMap initial_map) {
  if (stream.empty())
    throw std::invalid_argument("fit: empty keyframe stream");

  Trainer trainer(std::move(initial_map), intrinsics, cfg);
  auto run_steps = [&](std::int64_t count) {
    for (std::int64_t i = 0; i < count && trainer.iteration() < cfg.iterations;
         ++i) {
      trainer.step();
      if (trainer.densify_due()) trainer.densify_and_prune();
    }
  };

  for (const FrameSet& frame : stream) {
    trainer.add_keyframe(frame);
    run_steps(cfg.steps_per_keyframe);
  }
  run_steps(cfg.iterations);   // remaining budget over the full store

  FitResult result;
  result.log = trainer.log();
  result.map = trainer.take_map();
  return result;
}

}  // namespace splatmap
