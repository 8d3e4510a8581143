#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "mpacdc/errors.hpp"

namespace mpacdc {

enum class RadialBasisKind { gto_orthonormal };

struct RadialBasisSpec {
  int n_max = 6;
  double r_cut = 3.5;            // Angstrom
  double smearing_sigma = 0.3;   // Angstrom, density smearing (smeared mode)
  RadialBasisKind kind = RadialBasisKind::gto_orthonormal;
  double cutoff_width = 0.5;     // Angstrom

  void validate() const {
    if (n_max < 1) throw config_error("radial basis: n_max must be >= 1");
    if (!(cutoff_width > 0.0 && cutoff_width < r_cut))
      throw config_error("radial basis: need 0 < cutoff_width < r_cut");
    if (!(smearing_sigma > 0.0))
      throw config_error("radial basis: smearing_sigma must be > 0");
  }

  bool operator==(const RadialBasisSpec&) const = default;
};

// Smooth truncation: 1 inside r_cut - width, shifted-cosine decay to exactly
// 0 at r_cut, C^1 everywhere.
inline double cutoff_value(double r, double r_cut, double width) {
  if (r <= r_cut - width) return 1.0;
  if (r >= r_cut) return 0.0;
  return 0.5 * (1.0 + std::cos(M_PI * (r - r_cut + width) / width));
}

namespace detail {

struct Quadrature {
  std::vector<double> x, w;
};

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
inline const Quadrature& gauss_legendre(int n) {
  static std::map<int, Quadrature> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Quadrature q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.x[i] = -x;
    q.x[n - 1 - i] = x;
    q.w[i] = q.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return cache.emplace(n, std::move(q)).first->second;
}

#if defined(__GNUC__) && defined(__x86_64__)
using qfloat = __float128;
#else
using qfloat = long double;
#endif

inline qfloat qabs(qfloat x) { return x < 0 ? -x : x; }

inline qfloat qsqrt(qfloat x) {
  if (x <= 0) return 0;
  qfloat r = sqrtl(static_cast<long double>(x));
  r = static_cast<qfloat>(0.5) * (r + x / r);
  r = static_cast<qfloat>(0.5) * (r + x / r);
  return r;
}

// Cyclic Jacobi eigensolver for small symmetric matrices in extended
// precision. The GTO overlap can be conditioned up to ~1e12, which a
// double-precision inverse square root would not survive at the 1e-8
// orthonormality contract.
inline void jacobi_eig(std::vector<qfloat>& a, std::vector<qfloat>& v, int n) {
  v.assign(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) v[i * n + i] = 1;
  auto A = [&](int i, int j) -> qfloat& { return a[i * n + j]; };
  auto V = [&](int i, int j) -> qfloat& { return v[i * n + j]; };
  qfloat scale = 0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, qabs(A(i, i)));
  const qfloat tiny = scale * static_cast<qfloat>(1e-40);
  for (int sweep = 0; sweep < 60; ++sweep) {
    qfloat off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += qabs(A(p, q));
    if (off <= tiny) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (qabs(A(p, q)) <= tiny * static_cast<qfloat>(1e-3)) {
          A(p, q) = A(q, p) = 0;
          continue;
        }
        const qfloat theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
        qfloat t;
        if (qabs(theta) > static_cast<qfloat>(1e18)) {
          t = 1 / (2 * theta);  // avoid theta^2 overflow
        } else {
          t = 1 / (qabs(theta) + qsqrt(theta * theta + 1));
          if (theta < 0) t = -t;
        }
        const qfloat c = 1 / qsqrt(t * t + 1);
        const qfloat s = t * c;
        for (int k = 0; k < n; ++k) {
          const qfloat akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const qfloat apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const qfloat vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
  }
}

}  // namespace detail

// Loewdin-orthonormalized Gaussian-type radial basis. Primitives are
// r^l exp(-r^2 / (2 sigma_n^2)) with the n_max-independent width ladder
// sigma_n = r_cut / 1.3^(n-1), orthonormalized on [0, r_cut] with weight
// r^2; adding functions never changes the span of the earlier ones.
class RadialBasis {
 public:
  RadialBasis(const RadialBasisSpec& spec, int l_max)
      : spec_(spec), l_max_(l_max) {
    spec.validate();
    widths_.resize(spec.n_max);
    for (int n = 0; n < spec.n_max; ++n) {
      const double sigma = spec.r_cut / std::pow(1.3, n);
      widths_[n] = 1.0 / (2.0 * sigma * sigma);
    }
    coeffs_.resize(l_max + 1);
    for (int l = 0; l <= l_max; ++l) coeffs_[l] = orthonormalize(l);
  }

  const RadialBasisSpec& spec() const { return spec_; }
  int l_max() const { return l_max_; }

  // R_{nl}(r), n = 1..n_max (0-based in the output vector)
  std::vector<double> evaluate(int l, double r) const {
    if (r < 0.0 || r > spec_.r_cut)
      throw input_error("radial basis: r outside [0, r_cut]");
    std::vector<double> prim = primitives(l, r);
    return apply_coeffs(l, prim);
  }

  // Effective radial values for a Gaussian-smeared density: the projection
  // of a normalized Gaussian at distance r onto R_{nl}, which turns the
  // smeared expansion into the same per-neighbor form as the delta mode.
  std::vector<double> evaluate_smeared(int l, double r) const {
    if (r < 0.0 || r > spec_.r_cut)
      throw input_error("radial basis: r outside [0, r_cut]");
    const double sig = spec_.smearing_sigma;
    const double s2 = sig * sig;
    const double norm = 4.0 * M_PI * std::pow(2.0 * M_PI * s2, -1.5);
    const auto& gl = detail::gauss_legendre(256);
    const double lo = std::max(0.0, r - 8.0 * sig);
    const double hi = std::min(spec_.r_cut, r + 8.0 * sig);
    std::vector<double> acc(spec_.n_max, 0.0);
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
      const double x = 0.5 * (hi - lo) * (gl.x[k] + 1.0) + lo;
      const double wq = 0.5 * (hi - lo) * gl.w[k];
      const double gauss = std::exp(-(x - r) * (x - r) / (2.0 * s2));
      const double kernel = gauss * scaled_bessel_i(l, x * r / s2);
      const std::vector<double> rv = evaluate(l, x);
      for (int n = 0; n < spec_.n_max; ++n)
        acc[n] += wq * x * x * rv[n] * kernel;
    }
    for (double& v : acc) v *= norm;
    return acc;
  }

  // exp(-z) * i_l(z), modified spherical Bessel of the first kind
  static double scaled_bessel_i(int l, double z) {
    if (z < 1e-4) {
      double dblfac = 1.0;
      for (int k = 1; k <= l; ++k) dblfac *= 2.0 * k + 1.0;
      return std::exp(-z) * std::pow(z, l) / dblfac *
             (1.0 + z * z / (2.0 * (2.0 * l + 3.0)));
    }
    // Miller downward recurrence, normalized by the closed form for l = 0
    const int top = l + 20 + static_cast<int>(std::sqrt(40.0 * z));
    double ip1 = 0.0, i0 = 1e-280;
    double target = 0.0;
    for (int k = top; k >= 1; --k) {
      const double im1 = ip1 + (2.0 * k + 1.0) / z * i0;
      ip1 = i0;
      i0 = im1;
      if (k - 1 == l) target = i0;
      if (std::abs(i0) > 1e260) {  // rescale to avoid overflow
        ip1 *= 1e-260;
        i0 *= 1e-260;
        target *= 1e-260;
      }
    }
    const double e0 = (1.0 - std::exp(-2.0 * z)) / (2.0 * z);  // e^-z i_0
    return target / i0 * e0;
  }

 private:
  std::vector<double> primitives(int l, double r) const {
    std::vector<double> p(spec_.n_max);
    const double rl = (l == 0) ? 1.0 : std::pow(r, l);
    for (int n = 0; n < spec_.n_max; ++n)
      p[n] = rl * std::exp(-widths_[n] * r * r);
    return p;
  }

  std::vector<double> apply_coeffs(int l, const std::vector<double>& prim) const {
    const int n = spec_.n_max;
    std::vector<double> out(n, 0.0);
    const std::vector<double>& c = coeffs_[l];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[i] += c[i * n + j] * prim[j];
    return out;
  }

  std::vector<double> orthonormalize(int l) const {
    using detail::qfloat;
    const int n = spec_.n_max;
    const auto& gl = detail::gauss_legendre(256);

    // overlap of primitives with weight r^2 on [0, r_cut]
    std::vector<qfloat> s(static_cast<std::size_t>(n) * n, 0);
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
      const double r = 0.5 * spec_.r_cut * (gl.x[k] + 1.0);
      const double wq = 0.5 * spec_.r_cut * gl.w[k];
      std::vector<double> p = primitives(l, r);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          s[i * n + j] += static_cast<qfloat>(wq * r * r) *
                          static_cast<qfloat>(p[i]) * static_cast<qfloat>(p[j]);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) s[i * n + j] = s[j * n + i];

    std::vector<qfloat> v;
    detail::jacobi_eig(s, v, n);
    // S^{-1/2} = V diag(lambda^{-1/2}) V^T
    std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        qfloat acc = 0;
        for (int k = 0; k < n; ++k) {
          const qfloat lam = s[k * n + k];
          if (lam <= 0)
            throw config_error("radial basis: overlap not positive definite");
          acc += v[i * n + k] * v[j * n + k] / detail::qsqrt(lam);
        }
        c[i * n + j] = static_cast<double>(acc);
      }
    return c;
  }

  RadialBasisSpec spec_;
  int l_max_;
  std::vector<double> widths_;
  std::vector<std::vector<double>> coeffs_;  // per l, n_max x n_max
};

}  // namespace mpacdc
