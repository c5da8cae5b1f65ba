#include "splatmap/datasets.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "splatmap/png_io.hpp"
#include "splatmap/random.hpp"
#include "splatmap/renderer.hpp"
#include "splatmap/sh.hpp"

#include <nlohmann/json.hpp>

namespace splatmap {

using nlohmann::json;

Camera DatasetManifest::intrinsics() const {
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.width = width;
  c.height = height;
  return c;
}

std::filesystem::path DatasetManifest::resolve(const std::string& rel) const {
  return base_dir / root / rel;
}

namespace {

Palette palette_from_json(const json& j) {
  Palette p;
  for (const auto& e : j) {
    PaletteEntry entry;
    entry.id = e.at("id").get<int>();
    entry.name = e.value("name", std::string());
    const auto rgb = e.at("rgb");
    for (int c = 0; c < 3; ++c) entry.rgb255[c] = rgb.at(c).get<int>();
    p.entries.push_back(entry);
  }
  p.validate();
  return p;
}

json palette_to_json(const Palette& p) {
  json j = json::array();
  for (const auto& e : p.entries)
    j.push_back({{"id", e.id},
                 {"name", e.name},
                 {"rgb", {e.rgb255[0], e.rgb255[1], e.rgb255[2]}}});
  return j;
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("manifest: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest: " + path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.base_dir = path.parent_path();
  m.root = j.value("root", std::string("."));
  const auto& in_j = j.at("intrinsics");
  m.fx = in_j.at("fx").get<double>();
  m.fy = in_j.at("fy").get<double>();
  m.cx = in_j.at("cx").get<double>();
  m.cy = in_j.at("cy").get<double>();
  m.width = in_j.at("width").get<int>();
  m.height = in_j.at("height").get<int>();
  m.depth_scale = j.value("depth_scale", 5000.0);
  m.pose_file = j.at("pose_file").get<std::string>();
  m.keyframe_stride = j.value("keyframe_stride", 1);
  m.palette = palette_from_json(j.at("palette"));
  for (const auto& f : j.at("frames")) {
    ManifestFrame mf;
    mf.id = f.at("id").get<int>();
    mf.rgb = f.at("rgb").get<std::string>();
    mf.depth = f.at("depth").get<std::string>();
    mf.semantic = f.at("semantic").get<std::string>();
    m.frames.push_back(std::move(mf));
  }

  // Everything referenced must exist up front.
  if (!std::filesystem::exists(m.resolve(m.pose_file)))
    throw std::runtime_error("manifest: missing pose file " +
                             m.resolve(m.pose_file).string());
  for (const auto& f : m.frames)
    for (const std::string* rel : {&f.rgb, &f.depth, &f.semantic})
      if (!std::filesystem::exists(m.resolve(*rel)))
        throw std::runtime_error("manifest: frame " + std::to_string(f.id) +
                                 ": missing file " + m.resolve(*rel).string());
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  json j;
  j["root"] = root;
  j["intrinsics"] = {{"fx", fx},     {"fy", fy},        {"cx", cx},
                     {"cy", cy},     {"width", width},  {"height", height}};
  j["depth_scale"] = depth_scale;
  j["pose_file"] = pose_file;
  j["keyframe_stride"] = keyframe_stride;
  j["palette"] = palette_to_json(palette);
  j["frames"] = json::array();
  for (const auto& f : frames)
    j["frames"].push_back({{"id", f.id},
                           {"rgb", f.rgb},
                           {"depth", f.depth},
                           {"semantic", f.semantic}});
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("manifest: cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<std::pair<int, RigidTransform>> parse_poses(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("poses: cannot open " + path.string());
  std::vector<std::pair<int, RigidTransform>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int frame_id;
    Mat4 m;
    ls >> frame_id;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) ls >> m(r, c);
    if (!ls)
      throw std::runtime_error("poses: " + path.string() + ":" +
                               std::to_string(line_no) +
                               ": expected frame id + 16 floats");
    RigidTransform c2w = RigidTransform::from_matrix(m);
    const double drift = c2w.rigidity_error();
    if (drift > 1e-3)
      throw std::runtime_error("poses: " + path.string() + ":" +
                               std::to_string(line_no) +
                               ": matrix is not rigid (drift " +
                               std::to_string(drift) + ")");
    if (drift > 0) c2w.orthonormalize();
    out.emplace_back(frame_id, c2w.inverse());
  }
  return out;
}

void write_poses(const std::filesystem::path& path,
                 const std::vector<std::pair<int, RigidTransform>>& w2c_poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("poses: cannot write " + path.string());
  out.precision(17);
  for (const auto& [id, w2c] : w2c_poses) {
    const Mat4 m = w2c.inverse().matrix();
    out << id;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out << " " << m(r, c);
    out << "\n";
  }
}

FrameSet load_frame(const DatasetManifest& manifest, std::size_t index,
                    bool snap_semantic) {
  const ManifestFrame& mf = manifest.frames.at(index);
  FrameSet frame;
  frame.frame_id = mf.id;

  const PngRgb8 rgb = read_png_rgb8(manifest.resolve(mf.rgb));
  if (rgb.width != manifest.width || rgb.height != manifest.height)
    throw std::runtime_error("frame " + std::to_string(mf.id) +
                             ": rgb dimensions do not match the manifest");
  frame.rgb = dequantize_rgb8(rgb);

  const PngGray16 depth = read_png_gray16(manifest.resolve(mf.depth));
  if (depth.width != manifest.width || depth.height != manifest.height)
    throw std::runtime_error("frame " + std::to_string(mf.id) +
                             ": depth dimensions do not match the manifest");
  frame.depth = Image(manifest.height, manifest.width, 1);
  frame.depth_valid.assign(frame.depth.pixel_count(), 0);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    if (depth.data[i] == 0) continue;   // raw 0 = invalid
    frame.depth.data[i] = depth.data[i] / manifest.depth_scale;
    frame.depth_valid[i] = 1;
  }

  const PngRgb8 sem = read_png_rgb8(manifest.resolve(mf.semantic));
  if (sem.width != manifest.width || sem.height != manifest.height)
    throw std::runtime_error("frame " + std::to_string(mf.id) +
                             ": semantic dimensions do not match the manifest");
  frame.semantic = Image(manifest.height, manifest.width, 3);
  frame.labels.resize(frame.semantic.pixel_count());
  for (std::size_t pix = 0; pix < frame.labels.size(); ++pix) {
    const std::uint8_t r = sem.data[pix * 3], g = sem.data[pix * 3 + 1],
                       b = sem.data[pix * 3 + 2];
    int idx = manifest.palette.exact_match(r, g, b);
    if (idx < 0) {
      if (!snap_semantic)
        throw std::runtime_error(
            "frame " + std::to_string(mf.id) + ": off-palette semantic pixel (" +
            std::to_string(pix % manifest.width) + "," +
            std::to_string(pix / manifest.width) + ") = rgb(" +
            std::to_string(r) + "," + std::to_string(g) + "," +
            std::to_string(b) + ")");
      idx = manifest.palette.snap(Vec3(r / 255.0, g / 255.0, b / 255.0));
    }
    const Vec3 color = manifest.palette.color01(idx);
    for (int c = 0; c < 3; ++c) frame.semantic.data[pix * 3 + c] = color[c];
    frame.labels[pix] = manifest.palette.entries[idx].id;
  }
  return frame;
}

std::vector<FrameSet> load_dataset(const DatasetManifest& manifest,
                                   bool snap_semantic) {
  const auto poses = parse_poses(manifest.resolve(manifest.pose_file));
  std::vector<FrameSet> frames;
  const int stride = std::max(1, manifest.keyframe_stride);
  for (std::size_t i = 0; i < manifest.frames.size(); i += stride) {
    FrameSet f = load_frame(manifest, i, snap_semantic);
    bool found = false;
    for (const auto& [id, w2c] : poses)
      if (id == f.frame_id) {
        f.pose_w2c = w2c;
        found = true;
        break;
      }
    if (!found)
      throw std::runtime_error("dataset: no pose for frame " +
                               std::to_string(f.frame_id));
    frames.push_back(std::move(f));
  }
  return frames;
}

SyntheticSceneSpec SyntheticSceneSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene spec: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("scene spec: " + path.string() + ": " + e.what());
  }

  SyntheticSceneSpec s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.fx = j.at("fx").get<double>();
  s.fy = j.at("fy").get<double>();
  s.cx = j.at("cx").get<double>();
  s.cy = j.at("cy").get<double>();
  s.depth_scale = j.value("depth_scale", 5000.0);
  s.palette = palette_from_json(j.at("palette"));
  s.map.sh_degree_rgb = j.value("sh_degree_rgb", 0);
  s.map.sh_degree_sem = j.value("sh_degree_sem", 0);

  for (const auto& p : j.at("primitives")) {
    const auto pos = p.at("position");
    const Vec3 position(pos.at(0).get<double>(), pos.at(1).get<double>(),
                        pos.at(2).get<double>());
    const double radius = p.at("radius").get<double>();
    const double opacity = p.at("opacity").get<double>();
    const int label_index = p.at("label").get<int>();
    if (label_index < 0 || label_index >= static_cast<int>(s.palette.size()))
      throw std::runtime_error("scene spec: primitive label index " +
                               std::to_string(label_index) +
                               " outside the palette");
    const auto rgb = p.at("rgb");
    const Vec3 color(rgb.at(0).get<double>(), rgb.at(1).get<double>(),
                     rgb.at(2).get<double>());
    s.map.add(make_primitive(position, radius, opacity, color,
                             s.palette.color01(label_index), s.map.sh_degree_rgb,
                             s.map.sh_degree_sem));
    s.primitive_labels.push_back(label_index);
  }

  for (const auto& pj : j.at("poses")) {
    Mat4 m;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m(r, c) = pj.at(r * 4 + c).get<double>();
    s.trajectory_c2w.push_back(RigidTransform::from_matrix(m));
  }

  if (j.contains("noise")) {
    s.noise.depth_dropout = j["noise"].value("depth_dropout", 0.0);
    s.noise.label_flip = j["noise"].value("label_flip", 0.0);
    s.noise.seed = j["noise"].value("seed", 0ull);
  }
  return s;
}

DatasetManifest generate_synthetic(const SyntheticSceneSpec& spec,
                                   const std::filesystem::path& out_dir) {
  validate_map(spec.map);
  spec.palette.validate();
  if (spec.trajectory_c2w.empty())
    throw std::runtime_error("generate_synthetic: empty trajectory");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "rgb");
  fs::create_directories(out_dir / "depth");
  fs::create_directories(out_dir / "semantic");

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  manifest.fx = spec.fx;
  manifest.fy = spec.fy;
  manifest.cx = spec.cx;
  manifest.cy = spec.cy;
  manifest.width = spec.width;
  manifest.height = spec.height;
  manifest.depth_scale = spec.depth_scale;
  manifest.pose_file = "poses.txt";
  manifest.palette = spec.palette;

  std::mt19937_64 rng(spec.noise.seed * 0x9e3779b97f4a7c15ull + 7);
  RenderConfig cfg;
  cfg.record_contributors = false;

  std::vector<std::pair<int, RigidTransform>> poses;
  char name[64];
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

    PngRgb8 rgb = quantize_rgb8(out.rgb);

    PngGray16 depth;
    depth.width = spec.width;
    depth.height = spec.height;
    depth.data.resize(out.depth.data.size());
    for (std::size_t i = 0; i < out.depth.data.size(); ++i) {
      double raw = out.depth.data[i] * spec.depth_scale;
      raw = std::min(raw, 65535.0);
      depth.data[i] = static_cast<std::uint16_t>(raw + 0.5);
    }

    PngRgb8 sem;
    sem.width = spec.width;
    sem.height = spec.height;
    sem.data.resize(rgb.data.size());
    for (std::size_t pix = 0; pix < out.semantic.pixel_count(); ++pix) {
      const double* p = out.semantic.data.data() + pix * 3;
      const int idx = spec.palette.snap(Vec3(p[0], p[1], p[2]));
      for (int c = 0; c < 3; ++c)
        sem.data[pix * 3 + c] =
            static_cast<std::uint8_t>(spec.palette.entries[idx].rgb255[c]);
    }

    // Noise is applied after snapping so flipped labels stay on-palette.
    if (spec.noise.depth_dropout > 0.0)
      for (auto& d : depth.data)
        if (d != 0 && rand_uniform(rng) < spec.noise.depth_dropout) d = 0;
    if (spec.noise.label_flip > 0.0 && spec.palette.size() > 1)
      for (std::size_t pix = 0; pix < sem.data.size() / 3; ++pix)
        if (rand_uniform(rng) < spec.noise.label_flip) {
          const int cur = spec.palette.exact_match(sem.data[pix * 3],
                                                   sem.data[pix * 3 + 1],
                                                   sem.data[pix * 3 + 2]);
          int other = static_cast<int>(
              rand_index(rng, spec.palette.size() - 1));
          if (other >= cur) ++other;
          for (int c = 0; c < 3; ++c)
            sem.data[pix * 3 + c] = static_cast<std::uint8_t>(
                spec.palette.entries[other].rgb255[c]);
        }

    std::snprintf(name, sizeof(name), "rgb/%04zu.png", k);
    write_png_rgb8(out_dir / name, rgb);
    ManifestFrame mf;
    mf.id = static_cast<int>(k);
    mf.rgb = name;
    std::snprintf(name, sizeof(name), "depth/%04zu.png", k);
    write_png_gray16(out_dir / name, depth);
    mf.depth = name;
    std::snprintf(name, sizeof(name), "semantic/%04zu.png", k);
    write_png_rgb8(out_dir / name, sem);
    mf.semantic = name;
    manifest.frames.push_back(mf);

    poses.emplace_back(static_cast<int>(k), cam.pose_w2c);
  }

  write_poses(out_dir / manifest.pose_file, poses);
  manifest.save(out_dir / "manifest.json");
  return manifest;
}

}  // namespace splatmap
