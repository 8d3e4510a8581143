#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mpacdc/errors.hpp"
#include "mpacdc/rng.hpp"

namespace mpacdc {

// A group element of O(3): a proper rotation matrix, optionally composed
// with the inversion (improper = true). Mostly a test/audit surface.
struct Rotation {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  bool improper = false;

  // matrix actually applied to coordinates
  Eigen::Matrix3d applied() const { return improper ? (-matrix).eval() : matrix; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return applied() * v; }

  Rotation compose(const Rotation& other) const {
    return Rotation{matrix * other.matrix,
                    static_cast<bool>(improper ^ other.improper)};
  }

  void validate(double tol = 1e-12) const {
    const double det = matrix.determinant();
    if (std::abs(det - 1.0) > 1e-9)
      throw input_error("Rotation: determinant of the proper part is not +1");
    if ((matrix * matrix.transpose() - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() > tol)
      throw input_error("Rotation: matrix is not orthogonal");
  }

  static Rotation about_axis(const Eigen::Vector3d& axis, double angle) {
    return Rotation{Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(),
                    false};
  }

  // Haar-uniform random rotation (quaternion from 4 normals)
  static Rotation random(Rng& rng) {
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    q.normalize();
    return Rotation{Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix(),
                    false};
  }

  static Rotation inversion() { return Rotation{Eigen::Matrix3d::Identity(), true}; }
};

}  // namespace mpacdc
