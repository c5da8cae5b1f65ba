#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splatmap/datasets_palette.hpp"
#include "splatmap/frame.hpp"
#include "splatmap/geometry.hpp"
#include "splatmap/primitive.hpp"

namespace splatmap {

struct ManifestFrame {
  int id = 0;
  std::string rgb;
  std::string depth;
  std::string semantic;
};

// JSON dataset manifest. Image paths are relative to root, which is itself
// relative to the manifest location.
struct DatasetManifest {
  std::filesystem::path base_dir;   // directory containing the manifest
  std::string root = ".";
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 5000.0;      // raw units per meter
  std::string pose_file;
  int keyframe_stride = 1;
  Palette palette;
  std::vector<ManifestFrame> frames;

  Camera intrinsics() const;
  std::filesystem::path resolve(const std::string& rel) const;

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Lines of "frame_id m00 m01 ... m33", row-major 4x4 camera-to-world.
// Returns world-to-camera transforms; rotations with drift below 1e-3 are
// re-projected onto the nearest rotation, beyond that it is an error.
std::vector<std::pair<int, RigidTransform>> parse_poses(
    const std::filesystem::path& path);

// Writes camera-to-world lines in the parse_poses format.
void write_poses(const std::filesystem::path& path,
                 const std::vector<std::pair<int, RigidTransform>>& w2c_poses);

// Decodes manifest frames into FrameSets in manifest order, honoring
// keyframe_stride. snap_semantic replaces the exact-palette-match
// requirement with nearest-color snapping.
std::vector<FrameSet> load_dataset(const DatasetManifest& manifest,
                                   bool snap_semantic = false);
FrameSet load_frame(const DatasetManifest& manifest, std::size_t index,
                    bool snap_semantic = false);

struct SceneNoise {
  double depth_dropout = 0.0;   // probability a valid depth pixel is dropped
  double label_flip = 0.0;      // probability a semantic pixel flips class
  std::uint64_t seed = 0;
};

// Ground-truth scene description for synthetic dataset generation.
struct SyntheticSceneSpec {
  int width = 0, height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  double depth_scale = 5000.0;
  GaussianMap map;
  std::vector<int> primitive_labels;             // palette index per primitive
  std::vector<RigidTransform> trajectory_c2w;
  Palette palette;
  SceneNoise noise;

  static SyntheticSceneSpec load(const std::filesystem::path& path);
};

// Renders the trajectory with the reference renderer, snaps semantics to
// the palette, applies the configured noise, and writes PNGs, the pose
// file, and a manifest under out_dir.
DatasetManifest generate_synthetic(const SyntheticSceneSpec& spec,
                                   const std::filesystem::path& out_dir);

}  // namespace splatmap
