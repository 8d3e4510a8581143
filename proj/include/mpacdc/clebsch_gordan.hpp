#pragma once

#include <gmpxx.h>

#include <complex>
#include <map>
#include <tuple>
#include <vector>

#include "mpacdc/errors.hpp"
#include "mpacdc/spherical_harmonics.hpp"

namespace mpacdc {

// One real-basis coupling block <l1 m1; l2 m2 | lambda mu>. Rows of the
// (m1,m2) -> mu map are orthonormal: sum_{m1 m2} C[m1,m2,mu] C[m1,m2,mu']
// = delta_{mu mu'}.
struct CGBlock {
  int l1 = 0, l2 = 0, lambda = 0;
  std::vector<double> dense;  // (2l1+1) x (2l2+1) x (2lambda+1), row-major

  struct Nz {
    int m1i, m2i, mui;  // zero-based component indices (m + l)
    double c;
  };
  std::vector<Nz> nonzeros;

  double coeff(int m1, int m2, int mu) const {
    const int n2 = 2 * l2 + 1, nl = 2 * lambda + 1;
    return dense[((m1 + l1) * n2 + (m2 + l2)) * nl + (mu + lambda)];
  }
};

namespace detail {

inline mpz_class factorial(int n) {
  mpz_class f;
  mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(n));
  return f;
}

// Condon-Shortley complex Clebsch-Gordan coefficient from the closed-form
// factorial expression, evaluated in exact rational arithmetic. Returned as
// the correctly rounded double of sign(S) * sqrt(A * S^2).
inline double complex_cg(int l1, int m1, int l2, int m2, int lam, int mu) {
  if (m1 + m2 != mu) return 0.0;
  if (lam < std::abs(l1 - l2) || lam > l1 + l2) return 0.0;
  if (std::abs(m1) > l1 || std::abs(m2) > l2 || std::abs(mu) > lam) return 0.0;

  const mpq_class A =
      mpq_class(mpz_class(2 * lam + 1) * factorial(l1 + l2 - lam) *
                    factorial(l1 - l2 + lam) * factorial(-l1 + l2 + lam),
                factorial(l1 + l2 + lam + 1)) *
      mpq_class(factorial(lam + mu) * factorial(lam - mu) * factorial(l1 - m1) *
                factorial(l1 + m1) * factorial(l2 - m2) * factorial(l2 + m2));

  mpq_class S = 0;
  const int k_lo = std::max({0, l2 - lam - m1, l1 - lam + m2});
  const int k_hi = std::min({l1 + l2 - lam, l1 - m1, l2 + m2});
  for (int k = k_lo; k <= k_hi; ++k) {
    mpq_class term(1, 1);
    term /= factorial(k) * factorial(l1 + l2 - lam - k) * factorial(l1 - m1 - k) *
            factorial(l2 + m2 - k) * factorial(lam - l2 + m1 + k) *
            factorial(lam - l1 - m2 + k);
    if (k % 2) term = -term;
    S += term;
  }
  if (S == 0) return 0.0;

  mpq_class val = A * S * S;
  mpf_class f(val, 256);
  mpf_class root = sqrt(f);
  double out = root.get_d();
  return (S < 0) ? -out : out;
}

// Unitary change of basis from complex (Condon-Shortley) to real harmonics,
// rows indexed by the real m, columns by the complex m'.
inline std::vector<std::complex<double>> real_from_complex_u(int l) {
  const int n = 2 * l + 1;
  std::vector<std::complex<double>> u(n * n, 0.0);
  const double inv_sqrt2 = M_SQRT1_2;
  auto at = [&](int m, int mp) -> std::complex<double>& {
    return u[(m + l) * n + (mp + l)];
  };
  at(0, 0) = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double cs = (m % 2) ? -1.0 : 1.0;
    at(m, -m) = inv_sqrt2;
    at(m, m) = cs * inv_sqrt2;
    at(-m, -m) = std::complex<double>(0.0, inv_sqrt2);
    at(-m, m) = std::complex<double>(0.0, -cs * inv_sqrt2);
  }
  return u;
}

}  // namespace detail

// Precomputed real-basis coupling blocks for all |l1-l2| <= lambda <= l1+l2
// with l1, l2, lambda <= l_max_built. Immutable after construction.
class CGCache {
 public:
  explicit CGCache(int l_max) : l_max_built_(l_max) {
    if (l_max < 0 || l_max > kMaxAngularMomentum)
      throw config_error("CG cache: l_max out of range [0, 16]");

    std::vector<std::vector<std::complex<double>>> u(l_max + 1);
    for (int l = 0; l <= l_max; ++l) u[l] = detail::real_from_complex_u(l);

    for (int l1 = 0; l1 <= l_max; ++l1)
      for (int l2 = 0; l2 <= l_max; ++l2)
        for (int lam = std::abs(l1 - l2); lam <= std::min(l1 + l2, l_max); ++lam)
          entries_[{l1, l2, lam}] = build_block(l1, l2, lam, u);
  }

  int l_max_built() const { return l_max_built_; }

  bool has(int l1, int l2, int lambda) const {
    return entries_.count({l1, l2, lambda}) > 0;
  }

  const CGBlock& block(int l1, int l2, int lambda) const {
    auto it = entries_.find({l1, l2, lambda});
    if (it == entries_.end())
      throw contract_error("CG cache: block (" + std::to_string(l1) + "," +
                           std::to_string(l2) + "," + std::to_string(lambda) +
                           ") not built or violates selection rules");
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }

  // test fixture: negative control for the equivariance audit
  void corrupt_for_testing() {
    for (auto& [key, blk] : entries_) {
      if (blk.l1 == 1 && blk.l2 == 1 && blk.lambda == 2) {
        for (auto& v : blk.dense) v *= 1.01;
        for (auto& nz : blk.nonzeros) nz.c *= 1.01;
      }
    }
  }

 private:
  static CGBlock build_block(
      int l1, int l2, int lam,
      const std::vector<std::vector<std::complex<double>>>& u) {
    const int n1 = 2 * l1 + 1, n2 = 2 * l2 + 1, nl = 2 * lam + 1;
    CGBlock blk;
    blk.l1 = l1;
    blk.l2 = l2;
    blk.lambda = lam;
    blk.dense.assign(static_cast<std::size_t>(n1) * n2 * nl, 0.0);

    // complex CG, exact to double rounding
    std::vector<double> c(static_cast<std::size_t>(n1) * n2 * nl, 0.0);
    for (int m1 = -l1; m1 <= l1; ++m1)
      for (int m2 = -l2; m2 <= l2; ++m2) {
        const int mu = m1 + m2;
        if (std::abs(mu) > lam) continue;
        c[((m1 + l1) * n2 + (m2 + l2)) * static_cast<std::size_t>(nl) +
          (mu + lam)] = detail::complex_cg(l1, m1, l2, m2, lam, mu);
      }

    // conjugate into the real basis:
    //   B[m1,m2,mu] = sum U_lam[mu,mu'] conj(U_l1[m1,m1']) conj(U_l2[m2,m2'])
    //                     C[m1',m2',mu']
    // The result is purely real for even l1+l2+lambda and purely imaginary
    // otherwise; the imaginary case is mapped onto the real intertwiner -iB.
    const bool even = ((l1 + l2 + lam) % 2) == 0;
    const auto& u1 = u[l1];
    const auto& u2 = u[l2];
    const auto& ul = u[lam];
    for (int m1 = -l1; m1 <= l1; ++m1)
      for (int m2 = -l2; m2 <= l2; ++m2)
        for (int mu = -lam; mu <= lam; ++mu) {
          std::complex<double> acc = 0.0;
          // U rows couple only to +-m columns, so expand the sparse support
          const int m1s[2] = {m1, -m1};
          const int m2s[2] = {m2, -m2};
          for (int a = 0; a < (m1 ? 2 : 1); ++a)
            for (int b = 0; b < (m2 ? 2 : 1); ++b) {
              const int m1p = m1s[a], m2p = m2s[b];
              const int mup = m1p + m2p;
              if (std::abs(mup) > lam) continue;
              const std::complex<double> w =
                  ul[(mu + lam) * nl + (mup + lam)] *
                  std::conj(u1[(m1 + l1) * n1 + (m1p + l1)]) *
                  std::conj(u2[(m2 + l2) * n2 + (m2p + l2)]);
              acc += w * c[((m1p + l1) * n2 + (m2p + l2)) *
                               static_cast<std::size_t>(nl) +
                           (mup + lam)];
            }
          const double val = even ? acc.real() : acc.imag();
          const double spurious = even ? acc.imag() : acc.real();
          if (std::abs(spurious) > 1e-12)
            throw contract_error("CG cache: real-basis block has mixed parity");
          blk.dense[((m1 + l1) * n2 + (m2 + l2)) * static_cast<std::size_t>(nl) +
                    (mu + lam)] = val;
        }

    for (int i1 = 0; i1 < n1; ++i1)
      for (int i2 = 0; i2 < n2; ++i2)
        for (int il = 0; il < nl; ++il) {
          const double v =
              blk.dense[(static_cast<std::size_t>(i1) * n2 + i2) * nl + il];
          if (std::abs(v) > 1e-14) blk.nonzeros.push_back({i1, i2, il, v});
        }
    return blk;
  }

  int l_max_built_;
  std::map<std::tuple<int, int, int>, CGBlock> entries_;
};

inline CGCache build_cg_cache(int l_max) { return CGCache(l_max); }

}  // namespace mpacdc
