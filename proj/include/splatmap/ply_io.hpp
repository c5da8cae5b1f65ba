#pragma once

#include <filesystem>

#include "splatmap/primitive.hpp"

namespace splatmap {

// Binary little-endian PLY with per-vertex properties
//   x y z radius opacity f_rgb_<i> f_sem_<i>   (float32)
//   source_kf iter_added                       (int32)
// and header comments carrying the SH degrees. Float fields round-trip
// bit-exactly at 32-bit precision.
void save_map(const GaussianMap& map, const std::filesystem::path& path);

// Loads and validates. Malformed headers, missing properties, non-finite
// fields, and out-of-range records raise std::runtime_error with the file
// path and, for records, the vertex index.
GaussianMap load_map(const std::filesystem::path& path);

}  // namespace splatmap
