#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace splatmap {

// Dense row-major interleaved image, double per sample.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double* pixel(int y, int x) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const double* pixel(int y, int x) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::size_t sample_count() const { return data.size(); }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Per-pixel validity mask, 1 = valid. Length height*width of the image it
// accompanies.
using Mask = std::vector<std::uint8_t>;

inline void require_same_shape(const Image& a, const Image& b,
                               const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) +
                                ": image dimensions do not match");
}

}  // namespace splatmap
