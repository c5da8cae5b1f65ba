#pragma once

#include <cstdint>
#include <vector>

#include "splatmap/geometry.hpp"
#include "splatmap/image.hpp"

namespace splatmap {

// One aligned RGB + depth + semantic observation with its pose. Semantic
// content is stored twice: as palette colors in [0,1] (what the loss sees)
// and as integer label ids (what mIoU sees).
struct FrameSet {
  int frame_id = 0;
  Image rgb;                          // H x W x 3, [0,1]
  Image depth;                        // H x W x 1, meters; invalid pixels 0
  Mask depth_valid;                   // H*W
  Image semantic;                     // H x W x 3, palette colors in [0,1]
  std::vector<std::int32_t> labels;   // H*W label ids
  RigidTransform pose_w2c;
};

}  // namespace splatmap
