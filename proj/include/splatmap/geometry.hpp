#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace splatmap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Rigid body transform y = R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation;
    m.block<3, 1>(0, 3) = translation;
    return m;
  }

  static RigidTransform from_matrix(const Mat4& m) {
    RigidTransform t;
    t.rotation = m.block<3, 3>(0, 0);
    t.translation = m.block<3, 1>(0, 3);
    return t;
  }

  // Deviation of the rotation block from a proper rotation.
  double rigidity_error() const {
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    double e = err.cwiseAbs().maxCoeff();
    return std::max(e, std::abs(rotation.determinant() - 1.0));
  }

  // Projects the rotation block onto the nearest proper rotation.
  void orthonormalize() {
    Eigen::JacobiSVD<Mat3> svd(rotation,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
      Mat3 flip = Mat3::Identity();
      flip(2, 2) = -1.0;
      r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    rotation = r;
  }
};

// Pinhole camera with a world-to-camera pose.
struct Camera {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  RigidTransform pose_w2c;

  double mean_focal() const { return 0.5 * (fx + fy); }

  Vec3 center_world() const {
    return -(pose_w2c.rotation.transpose() * pose_w2c.translation);
  }

  // Camera for pyramid level l: dimensions ceil-halved per level, focal
  // lengths scaled by exactly 2^-l, principal point scaled with the
  // half-pixel convention c' = (c + 0.5) * 2^-l - 0.5.
  Camera at_level(int level) const {
    if (level < 0) throw std::out_of_range("camera level must be >= 0");
    Camera c = *this;
    const double s = std::ldexp(1.0, -level);
    for (int i = 0; i < level; ++i) {
      c.width = (c.width + 1) / 2;
      c.height = (c.height + 1) / 2;
    }
    c.fx = fx * s;
    c.fy = fy * s;
    c.cx = (cx + 0.5) * s - 0.5;
    c.cy = (cy + 0.5) * s - 0.5;
    return c;
  }

  void validate(double rigid_tol = 1e-6) const {
    if (!(fx > 0) || !(fy > 0))
      throw std::invalid_argument("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("camera: image dimensions must be positive");
    if (pose_w2c.rigidity_error() > rigid_tol)
      throw std::invalid_argument("camera: pose rotation is not orthonormal");
  }
};

}  // namespace splatmap
