#pragma once

#include <cstdint>
#include <vector>

#include "splatmap/datasets_palette.hpp"
#include "splatmap/frame.hpp"
#include "splatmap/renderer.hpp"

#include <nlohmann/json_fwd.hpp>

namespace splatmap {

// 10*log10(1/MSE) for images in [0,1]; +infinity when the images are equal.
double psnr(const Image& a, const Image& b);

// Mean absolute depth error over valid pixels, reported in centimeters.
double depth_l1_cm(const Image& rendered, const Image& gt, const Mask& valid);

struct ClassIoU {
  int label = 0;
  double iou = 0.0;
  std::int64_t gt_pixels = 0;
};

struct MiouResult {
  double miou = 0.0;   // mean over classes present in gt
  std::vector<ClassIoU> per_class;
};

// Snaps rendered colors to the nearest palette entry and scores IoU per
// class present in the ground-truth labels.
MiouResult miou(const Image& rendered_semantic,
                const std::vector<std::int32_t>& gt_labels,
                const Palette& palette);

struct FrameMetrics {
  int frame_id = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double depth_l1_cm = 0.0;
  double miou = 0.0;
};

struct MetricsReport {
  std::vector<FrameMetrics> per_frame;
  FrameMetrics mean;
  nlohmann::json to_json() const;
};

// Renders every frame at level 0 and scores all metrics against it.
// intrinsics supplies the shared camera geometry; each frame's pose comes
// from the frame itself.
MetricsReport evaluate(const GaussianMap& map,
                       const std::vector<FrameSet>& frames,
                       const Camera& intrinsics, const Palette& palette,
                       const RenderConfig& config);

}  // namespace splatmap
