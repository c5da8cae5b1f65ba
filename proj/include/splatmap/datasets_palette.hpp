#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatmap/geometry.hpp"

namespace splatmap {

struct PaletteEntry {
  int id = 0;
  std::string name;
  std::array<int, 3> rgb255{0, 0, 0};
};

// Ordered semantic label palette. Colors are stored as exact 8-bit values so
// loaded pixels can be matched without float fuzz.
struct Palette {
  std::vector<PaletteEntry> entries;

  std::size_t size() const { return entries.size(); }

  Vec3 color01(std::size_t index) const {
    const auto& c = entries.at(index).rgb255;
    return Vec3(c[0] / 255.0, c[1] / 255.0, c[2] / 255.0);
  }

  // Index of the exact 8-bit color, or -1.
  int exact_match(std::uint8_t r, std::uint8_t g, std::uint8_t b) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& c = entries[i].rgb255;
      if (c[0] == r && c[1] == g && c[2] == b) return static_cast<int>(i);
    }
    return -1;
  }

  // Index of the nearest entry in RGB Euclidean distance.
  int snap(const Vec3& color01) const {
    if (entries.empty()) throw std::invalid_argument("palette: empty");
    int best = 0;
    double best_d = (color01 - this->color01(0)).squaredNorm();
    for (std::size_t i = 1; i < entries.size(); ++i) {
      const double d = (color01 - this->color01(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  void validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t j = i + 1; j < entries.size(); ++j) {
        if (entries[i].rgb255 == entries[j].rgb255)
          throw std::invalid_argument("palette: duplicate color for labels " +
                                      std::to_string(entries[i].id) + " and " +
                                      std::to_string(entries[j].id));
        if (entries[i].id == entries[j].id)
          throw std::invalid_argument("palette: duplicate label id " +
                                      std::to_string(entries[i].id));
      }
  }
};

}  // namespace splatmap
