#include "splatmap/projection.hpp"

#include <cmath>

namespace splatmap {

double g3d(const GaussianPrimitive& p, const Vec3& x) {
  const double d2 = (x - p.position).squaredNorm();
  return p.opacity * std::exp(-d2 / (2.0 * p.radius * p.radius));
}

Projected2D project(const GaussianPrimitive& p, const Camera& camera,
                    double near_clip) {
  Projected2D out;
  const Vec3 pc = camera.pose_w2c.apply(p.position);
  out.depth = pc.z();
  if (!(out.depth > near_clip)) {
    // Behind or at the clip plane: report a finite but invisible result.
    out.mu2d = Vec2::Zero();
    out.r2d = 0.0;
    out.visible = false;
    return out;
  }
  out.mu2d.x() = camera.fx * pc.x() / out.depth + camera.cx;
  out.mu2d.y() = camera.fy * pc.y() / out.depth + camera.cy;
  out.r2d = camera.mean_focal() * p.radius / out.depth;

  const double support = kSupportSigmas * out.r2d;
  out.visible = out.mu2d.x() + support >= -0.5 &&
                out.mu2d.x() - support <= camera.width - 0.5 &&
                out.mu2d.y() + support >= -0.5 &&
                out.mu2d.y() - support <= camera.height - 0.5;
  return out;
}

double g2d(const Projected2D& proj, const Vec2& pixel, double opacity) {
  const double d2 = (pixel - proj.mu2d).squaredNorm();
  return opacity * std::exp(-d2 / (2.0 * proj.r2d * proj.r2d));
}

ProjectionGrad project_gradients(const GaussianPrimitive& p,
                                 const Camera& camera, const Vec2& d_mu2d,
                                 double d_r2d, double d_depth) {
  const Vec3 pc = camera.pose_w2c.apply(p.position);
  const double d = pc.z();
  const double inv_d = 1.0 / d;
  const double inv_d2 = inv_d * inv_d;
  const double fbar = camera.mean_focal();

  Vec3 d_pc;
  d_pc.x() = d_mu2d.x() * camera.fx * inv_d;
  d_pc.y() = d_mu2d.y() * camera.fy * inv_d;
  d_pc.z() = -d_mu2d.x() * camera.fx * pc.x() * inv_d2 -
             d_mu2d.y() * camera.fy * pc.y() * inv_d2 -
             d_r2d * fbar * p.radius * inv_d2 + d_depth;

  ProjectionGrad g;
  g.d_position = camera.pose_w2c.rotation.transpose() * d_pc;
  g.d_radius = d_r2d * fbar * inv_d;
  return g;
}

}  // namespace splatmap
