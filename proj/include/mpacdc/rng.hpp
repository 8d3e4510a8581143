#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mpacdc {

// Deterministic RNG wrapper. The standard distributions are not pinned by
// the C++ standard, so uniform/normal draws are implemented explicitly on
// top of the mt19937_64 bit stream; outputs are identical across platforms
// and thread counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // substream for independent stages (e.g. per-split shuffles)
  Rng fork(std::uint64_t stream) {
    return Rng(gen_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  std::uint64_t raw() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection to avoid modulo bias
    const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= lim);
    return x % n;
  }

  double normal() {
    // Box-Muller, cached second value
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mpacdc
