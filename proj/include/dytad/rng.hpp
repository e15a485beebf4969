#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dytad/tensor.hpp"

namespace dytad {

// Deterministic random source. Distributions are implemented by hand
// (rather than through std::*_distribution) so that generated streams are
// identical across standard libraries, which the byte-identical artifact
// outputs rely on.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t raw() { return gen_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
  }

  // standard normal via Box-Muller
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Array64 normal_array(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Array64 m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal();
    return m;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// zero-mean init scaled by 1/sqrt(fan_in)
inline Array64 init_weight(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
  return rng.normal_array(rows, cols, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace dytad
