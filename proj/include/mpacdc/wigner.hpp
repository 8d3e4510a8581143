#pragma once

#include <Eigen/Dense>

#include "mpacdc/clebsch_gordan.hpp"
#include "mpacdc/rotation.hpp"

namespace mpacdc {

// Real Wigner matrix D^lambda(R) with Y_lambda(R d) = D^lambda(R) Y_lambda(d).
// Built by CG recursion from D^1, which in the real (y,z,x) component order
// is the rotation matrix itself conjugated by the axis permutation.
// Improper rotations pick up the (-1)^lambda inversion factor.
inline Eigen::MatrixXd wigner_matrix(int lambda, const Rotation& rot,
                                     const CGCache& cache) {
  if (lambda > cache.l_max_built())
    throw contract_error("wigner_matrix: lambda exceeds the built CG cache");
  const double parity = (rot.improper && (lambda % 2)) ? -1.0 : 1.0;
  if (lambda == 0) return Eigen::MatrixXd::Constant(1, 1, 1.0);

  const Eigen::Matrix3d& r = rot.matrix;
  Eigen::MatrixXd d1(3, 3);
  // component order (m=-1,0,1) = (y,z,x)
  const int perm[3] = {1, 2, 0};  // real-harmonic slot -> Cartesian axis
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) d1(a, b) = r(perm[a], perm[b]);
  if (lambda == 1) return parity * d1;

  Eigen::MatrixXd prev = d1;
  for (int l = 2; l <= lambda; ++l) {
    const CGBlock& cg = cache.block(l - 1, 1, l);
    const int n = 2 * l + 1, np = 2 * l - 1;
    // D^l = C (D^{l-1} x D^1) C^T  -- C rows are orthonormal on the l image
    Eigen::MatrixXd kron(np * 3, np * 3);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < np; ++j)
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            kron(i * 3 + a, j * 3 + b) = prev(i, j) * d1(a, b);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, np * 3);
    for (const auto& nz : cg.nonzeros) c(nz.mui, nz.m1i * 3 + nz.m2i) = nz.c;
    prev = c * kron * c.transpose();
  }
  return parity * prev;
}

}  // namespace mpacdc
