#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mpacdc/errors.hpp"

namespace mpacdc {

constexpr int kMaxAngularMomentum = 16;

// index of (l, m) in a flat [0, (l_max+1)^2) layout, m = -l..l
inline int lm_index(int l, int m) { return l * l + (m + l); }

// Real orthonormal spherical harmonics, Condon-Shortley-free, ordered
// m = -l..l. Normalization: sum_m Y_lm(d)^2 = (2l+1)/(4pi) for unit d.
// For l = 1 the components are sqrt(3/4pi) * (y, z, x).
//
// Evaluation uses the fully normalized associated-Legendre recurrence
// (Holmes-Featherstone), stable to l = 16 and far beyond.
class SphericalHarmonics {
 public:
  explicit SphericalHarmonics(int l_max) : l_max_(l_max) {
    if (l_max < 0 || l_max > kMaxAngularMomentum)
      throw config_error("spherical harmonics: l_max out of range [0, 16]");
  }

  int l_max() const { return l_max_; }
  int size() const { return (l_max_ + 1) * (l_max_ + 1); }

  // direction must be unit to 1e-10; callers normalize explicitly
  std::vector<double> evaluate(const Eigen::Vector3d& direction) const {
    const double norm = direction.norm();
    if (std::abs(norm - 1.0) > 1e-10)
      throw input_error("spherical harmonics: direction is not a unit vector");
    return evaluate_unchecked(direction);
  }

  std::vector<double> evaluate_unchecked(const Eigen::Vector3d& d) const {
    const int L = l_max_;
    std::vector<double> out(size(), 0.0);

    const double ct = d.z();                    // cos(theta)
    const double rho = std::hypot(d.x(), d.y());  // sin(theta)
    double cphi = 1.0, sphi = 0.0;
    if (rho > 1e-300) {
      cphi = d.x() / rho;
      sphi = d.y() / rho;
    }

    // plm[m] holds the fully normalized P~_l^m for the current l;
    // pmm accumulates the sectoral term P~_m^m.
    std::vector<double> prev(L + 1, 0.0), cur(L + 1, 0.0), next(L + 1, 0.0);
    // cos(m phi), sin(m phi) recurrences
    std::vector<double> cm(L + 1), sm(L + 1);
    cm[0] = 1.0;
    sm[0] = 0.0;
    for (int m = 1; m <= L; ++m) {
      cm[m] = cm[m - 1] * cphi - sm[m - 1] * sphi;
      sm[m] = sm[m - 1] * cphi + cm[m - 1] * sphi;
    }

    const double inv_sqrt4pi = 0.5 * M_2_SQRTPI * 0.5;  // 1/(2 sqrt(pi))
    double pmm = inv_sqrt4pi;                            // P~_0^0
    for (int m = 0; m <= L; ++m) {
      if (m > 0) pmm *= rho * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
      double p_lm1 = pmm;  // P~_m^m
      emit(out, m, m, p_lm1, cm[m], sm[m]);
      if (m == L) break;
      double p_l = ct * std::sqrt(2.0 * m + 3.0) * pmm;  // P~_{m+1}^m
      emit(out, m + 1, m, p_l, cm[m], sm[m]);
      for (int l = m + 2; l <= L; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
        const double b = std::sqrt(((double(l - 1) * (l - 1) - double(m) * m)) /
                                   (4.0 * double(l - 1) * (l - 1) - 1.0));
        const double p = a * (ct * p_l - b * p_lm1);
        emit(out, l, m, p, cm[m], sm[m]);
        p_lm1 = p_l;
        p_l = p;
      }
    }
    return out;
  }

 private:
  static void emit(std::vector<double>& out, int l, int m, double plm,
                   double cmphi, double smphi) {
    if (m == 0) {
      out[lm_index(l, 0)] = plm;
    } else {
      out[lm_index(l, m)] = M_SQRT2 * plm * cmphi;
      out[lm_index(l, -m)] = M_SQRT2 * plm * smphi;
    }
  }

  int l_max_;
};

}  // namespace mpacdc
