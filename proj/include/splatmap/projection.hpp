#pragma once

#include "splatmap/geometry.hpp"
#include "splatmap/primitive.hpp"

namespace splatmap {

inline constexpr double kNearClip = 0.01;        // meters
inline constexpr double kSupportSigmas = 3.0;    // screen-space support radius

// A primitive projected into a camera.
struct Projected2D {
  Vec2 mu2d = Vec2::Zero();   // pixels
  double r2d = 0.0;           // pixels
  double depth = 0.0;         // camera-space z, meters
  bool visible = false;
};

// World-space influence o * exp(-|x-mu|^2 / (2 r^2)).
double g3d(const GaussianPrimitive& p, const Vec3& x);

// Perspective projection of the primitive center and footprint. The 2D
// radius is fbar * r / d with fbar = (fx+fy)/2. visible requires depth
// beyond the near clip and the 3-sigma disk to touch the image rectangle
// [-0.5, W-0.5] x [-0.5, H-0.5] (pixel centers at integer coordinates).
Projected2D project(const GaussianPrimitive& p, const Camera& camera,
                    double near_clip = kNearClip);

// Image-space influence o * exp(-|p-mu2d|^2 / (2 r2d^2)).
double g2d(const Projected2D& proj, const Vec2& pixel, double opacity);

struct ProjectionGrad {
  Vec3 d_position = Vec3::Zero();
  double d_radius = 0.0;
};

// Chain rule through project(): pulls upstream gradients with respect to
// mu2d, r2d, and depth back to the primitive position and radius.
ProjectionGrad project_gradients(const GaussianPrimitive& p,
                                 const Camera& camera, const Vec2& d_mu2d,
                                 double d_r2d, double d_depth);

}  // namespace splatmap
