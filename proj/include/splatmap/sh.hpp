#pragma once

#include "splatmap/geometry.hpp"

namespace splatmap {

// Real spherical harmonics basis up to degree 2, standard splatting
// constants and sign conventions. A color channel decodes as
//   value = 0.5 + sum_k basis[k] * coeff[k],
// clamped to [0,1] by the renderer.
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792,
                                    0.31539156525252005, -1.0925484305920792,
                                    0.5462742152960396};
inline constexpr int kShMaxDegree = 2;

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Fills basis[0..(degree+1)^2) for unit direction dir.
inline void sh_basis(int degree, const Vec3& dir, double* basis) {
  basis[0] = kShC0;
  if (degree < 1) return;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  basis[1] = -kShC1 * y;
  basis[2] = kShC1 * z;
  basis[3] = -kShC1 * x;
  if (degree < 2) return;
  basis[4] = kShC2[0] * x * y;
  basis[5] = kShC2[1] * y * z;
  basis[6] = kShC2[2] * (2.0 * z * z - x * x - y * y);
  basis[7] = kShC2[3] * x * z;
  basis[8] = kShC2[4] * (x * x - y * y);
}

// Fills grad[k] = d basis[k] / d dir for unit direction dir.
inline void sh_basis_dir_grad(int degree, const Vec3& dir, Vec3* grad) {
  grad[0] = Vec3::Zero();
  if (degree < 1) return;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  grad[1] = Vec3(0, -kShC1, 0);
  grad[2] = Vec3(0, 0, kShC1);
  grad[3] = Vec3(-kShC1, 0, 0);
  if (degree < 2) return;
  grad[4] = kShC2[0] * Vec3(y, x, 0);
  grad[5] = kShC2[1] * Vec3(0, z, y);
  grad[6] = kShC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
  grad[7] = kShC2[3] * Vec3(z, 0, x);
  grad[8] = kShC2[4] * Vec3(2.0 * x, -2.0 * y, 0);
}

// Encodes a constant color channel value into the DC coefficient.
inline double sh_dc_from_value(double value) { return (value - 0.5) / kShC0; }
inline double sh_value_from_dc(double dc) { return 0.5 + kShC0 * dc; }

}  // namespace splatmap
