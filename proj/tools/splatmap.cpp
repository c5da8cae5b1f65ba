// splatmap: synthesize, fit, render, and evaluate gaussian splat maps.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "splatmap/backward.hpp"
#include "splatmap/datasets.hpp"
#include "splatmap/metrics.hpp"
#include "splatmap/parallel.hpp"
#include "splatmap/ply_io.hpp"
#include "splatmap/png_io.hpp"
#include "splatmap/renderer.hpp"
#include "splatmap/trainer.hpp"

namespace fs = std::filesystem;
using namespace splatmap;

namespace {

PngRgb8 depth_to_gray(const Image& depth, double max_depth) {
  PngRgb8 out;
  out.width = depth.width;
  out.height = depth.height;
  out.data.resize(depth.pixel_count() * 3);
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    const double v = max_depth > 0 ? depth.data[i] / max_depth : 0.0;
    const std::uint8_t g = quantize8(v);
    out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = g;
  }
  return out;
}

int run_synth(const std::string& spec_path, const std::string& out_dir,
              double depth_dropout, double label_flip, std::uint64_t seed) {
  SyntheticSceneSpec spec = SyntheticSceneSpec::load(spec_path);
  if (depth_dropout >= 0) spec.noise.depth_dropout = depth_dropout;
  if (label_flip >= 0) spec.noise.label_flip = label_flip;
  spec.noise.seed = seed;
  generate_synthetic(spec, out_dir);
  std::cout << (fs::path(out_dir) / "manifest.json").string() << "\n";
  return 0;
}

int run_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out_path, const std::string& log_path,
            const std::string& init_map_path, std::int64_t iterations_override,
            std::int64_t seed_override, bool snap_semantic) {
  const DatasetManifest manifest = DatasetManifest::load(data_path);
  TrainConfig cfg =
      config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
  if (iterations_override >= 0) cfg.iterations = iterations_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

  GaussianMap initial;
  if (!init_map_path.empty()) {
    initial = load_map(init_map_path);
    cfg.seed_from_keyframes = false;
  }

  const std::vector<FrameSet> frames = load_dataset(manifest, snap_semantic);
  FitResult result = fit(frames, manifest.intrinsics(), cfg, std::move(initial));
  save_map(result.map, out_path);
  if (!log_path.empty()) write_log_jsonl(log_path, result.log);

  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::printf("fit: %zu primitives, %lld iterations, final loss %.5f\n",
                result.map.size(),
                static_cast<long long>(last.iteration + 1), last.l_total);
  } else {
    std::printf("fit: %zu primitives, 0 iterations\n", result.map.size());
  }
  return 0;
}

int run_render(const std::string& map_path, const std::string& data_path,
               const std::string& pose_arg, const std::string& channels,
               int level, const std::string& out_dir, double depth_scale) {
  const GaussianMap map = load_map(map_path);
  const DatasetManifest manifest = DatasetManifest::load(data_path);

  Camera cam = manifest.intrinsics();
  bool is_index = !pose_arg.empty() &&
                  pose_arg.find_first_not_of("0123456789") == std::string::npos;
  if (is_index) {
    const auto poses = parse_poses(manifest.resolve(manifest.pose_file));
    const int want = std::stoi(pose_arg);
    bool found = false;
    for (const auto& [id, w2c] : poses)
      if (id == want) {
        cam.pose_w2c = w2c;
        found = true;
        break;
      }
    if (!found)
      throw std::runtime_error("render: no pose with frame id " + pose_arg);
  } else {
    const auto poses = parse_poses(pose_arg);
    if (poses.empty())
      throw std::runtime_error("render: pose file is empty: " + pose_arg);
    cam.pose_w2c = poses.front().second;
  }

  std::vector<std::string> wanted;
  std::stringstream ss(channels);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item != "rgb" && item != "depth" && item != "semantic")
      throw CLI::ValidationError("--channels",
                                 "unknown channel '" + item + "'");
    wanted.push_back(item);
  }
  if (wanted.empty())
    throw CLI::ValidationError("--channels", "no channels requested");

  RenderConfig cfg;
  cfg.record_contributors = false;
  const RenderOutput out = render_at_level(map, cam, level, cfg);

  fs::create_directories(out_dir);
  for (const std::string& ch : wanted) {
    const fs::path path = fs::path(out_dir) / (ch + ".png");
    if (ch == "rgb") {
      write_png_rgb8(path, quantize_rgb8(out.rgb));
    } else if (ch == "semantic") {
      write_png_rgb8(path, quantize_rgb8(out.semantic));
    } else {
      PngGray16 depth;
      depth.width = out.depth.width;
      depth.height = out.depth.height;
      depth.data.resize(out.depth.pixel_count());
      for (std::size_t i = 0; i < depth.data.size(); ++i)
        depth.data[i] = static_cast<std::uint16_t>(
            std::min(out.depth.data[i] * depth_scale, 65535.0) + 0.5);
      write_png_gray16(path, depth);
    }
    std::cout << path.string() << "\n";
  }
  return 0;
}

int run_eval(const std::string& map_path, const std::string& data_path,
             const std::string& out_path, const std::string& grid_path,
             bool snap_semantic) {
  const GaussianMap map = load_map(map_path);
  const DatasetManifest manifest = DatasetManifest::load(data_path);
  const std::vector<FrameSet> frames = load_dataset(manifest, snap_semantic);

  RenderConfig cfg;
  const MetricsReport report =
      evaluate(map, frames, manifest.intrinsics(), manifest.palette, cfg);

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("eval: cannot write " + out_path);
  out << report.to_json().dump(2) << "\n";
  std::printf("eval: mean psnr=%.2f ssim=%.4f depth_l1=%.4fcm miou=%.4f\n",
              report.mean.psnr, report.mean.ssim, report.mean.depth_l1_cm,
              report.mean.miou);

  if (!grid_path.empty()) {
    // Mosaic: one column per frame (up to 8), rows alternating rendered and
    // ground truth for rgb / depth / semantic.
    const std::size_t n_cols = std::min<std::size_t>(frames.size(), 8);
    const int W = manifest.width, H = manifest.height;
    PngRgb8 grid;
    grid.width = W * static_cast<int>(n_cols);
    grid.height = H * 6;
    grid.data.assign(static_cast<std::size_t>(grid.width) * grid.height * 3, 0);
    auto blit = [&](const PngRgb8& tile, int row, int col) {
      for (int y = 0; y < H; ++y)
        std::copy(tile.data.begin() + static_cast<std::size_t>(y) * W * 3,
                  tile.data.begin() + static_cast<std::size_t>(y + 1) * W * 3,
                  grid.data.begin() +
                      ((static_cast<std::size_t>(row) * H + y) * grid.width +
                       static_cast<std::size_t>(col) * W) *
                          3);
    };
    RenderConfig rcfg;
    rcfg.record_contributors = false;
    for (std::size_t k = 0; k < n_cols; ++k) {
      Camera cam = manifest.intrinsics();
      cam.pose_w2c = frames[k].pose_w2c;
      const RenderOutput r = render(map, cam, rcfg);
      double max_depth = 1e-9;
      for (double d : r.depth.data) max_depth = std::max(max_depth, d);
      for (double d : frames[k].depth.data) max_depth = std::max(max_depth, d);
      blit(quantize_rgb8(r.rgb), 0, static_cast<int>(k));
      blit(quantize_rgb8(frames[k].rgb), 1, static_cast<int>(k));
      blit(depth_to_gray(r.depth, max_depth), 2, static_cast<int>(k));
      blit(depth_to_gray(frames[k].depth, max_depth), 3, static_cast<int>(k));
      blit(quantize_rgb8(r.semantic), 4, static_cast<int>(k));
      blit(quantize_rgb8(frames[k].semantic), 5, static_cast<int>(k));
    }
    write_png_rgb8(grid_path, grid);
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, int size, int primitives, double tol) {
  const GradCheckReport report = check_gradients(seed, size, primitives, tol);
  std::cout << report.summary();
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-channel gaussian splatting: fit, render, evaluate"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string spec_path, out_dir;
  double dropout = -1, flip = -1;
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", spec_path, "Scene spec JSON")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--depth-dropout", dropout, "Depth dropout probability");
  synth->add_option("--label-flip", flip, "Label flip probability");
  synth->add_option("--seed", synth_seed, "Noise seed");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a map to a dataset");
  std::string data_path, config_path, map_out, log_path, init_map;
  std::int64_t iters_override = -1, fit_seed = -1;
  bool snap_semantic = false;
  fit_cmd->add_option("--data", data_path, "Dataset manifest JSON")->required();
  fit_cmd->add_option("--config", config_path, "Training config JSON");
  fit_cmd->add_option("--out", map_out, "Output map PLY")->required();
  fit_cmd->add_option("--log", log_path, "Training log JSONL");
  fit_cmd->add_option("--init-map", init_map,
                      "Start from this map instead of seeding");
  fit_cmd->add_option("--iterations", iters_override, "Override iterations");
  fit_cmd->add_option("--seed", fit_seed, "Override RNG seed");
  fit_cmd->add_flag("--snap-semantic", snap_semantic,
                    "Snap off-palette semantic pixels to the nearest entry");

  // render
  auto* render_cmd = app.add_subcommand("render", "Render a map");
  std::string r_map, r_data, r_pose, r_channels = "rgb,depth,semantic", r_out;
  int r_level = 0;
  double r_depth_scale = 5000.0;
  render_cmd->add_option("--map", r_map, "Map PLY")->required();
  render_cmd->add_option("--data", r_data, "Manifest (intrinsics + poses)")
      ->required();
  render_cmd->add_option("--pose", r_pose, "Frame id or pose file")->required();
  render_cmd->add_option("--channels", r_channels,
                         "Comma list of rgb,depth,semantic");
  render_cmd->add_option("--level", r_level, "Pyramid level");
  render_cmd->add_option("--out", r_out, "Output directory")->required();
  render_cmd->add_option("--depth-scale", r_depth_scale,
                         "Raw units per meter for the 16-bit depth PNG");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a map on a dataset");
  std::string e_map, e_data, e_out, e_grid;
  bool e_snap = false;
  eval_cmd->add_option("--map", e_map, "Map PLY")->required();
  eval_cmd->add_option("--data", e_data, "Dataset manifest JSON")->required();
  eval_cmd->add_option("--out", e_out, "Report JSON")->required();
  eval_cmd->add_option("--grid", e_grid, "Rendered-vs-gt mosaic PNG");
  eval_cmd->add_flag("--snap-semantic", e_snap,
                     "Snap off-palette semantic pixels");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck",
                                      "Analytic vs finite-difference check");
  std::uint64_t g_seed = 42;
  int g_size = 32, g_prims = 20;
  double g_tol = 1e-3;
  grad_cmd->add_option("--seed", g_seed, "Scene seed");
  grad_cmd->add_option("--size", g_size, "Image size");
  grad_cmd->add_option("--primitives", g_prims, "Primitive count");
  grad_cmd->add_option("--tol", g_tol, "Relative error tolerance");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_thread_count(threads);

  try {
    if (*synth) return run_synth(spec_path, out_dir, dropout, flip, synth_seed);
    if (*fit_cmd)
      return run_fit(data_path, config_path, map_out, log_path, init_map,
                     iters_override, fit_seed, snap_semantic);
    if (*render_cmd)
      return run_render(r_map, r_data, r_pose, r_channels, r_level, r_out,
                        r_depth_scale);
    if (*eval_cmd) return run_eval(e_map, e_data, e_out, e_grid, e_snap);
    if (*grad_cmd) return run_gradcheck(g_seed, g_size, g_prims, g_tol);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
