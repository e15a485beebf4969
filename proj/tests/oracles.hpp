#pragma once

// Shared helpers for the test suites. Oracles here are deliberately
// plain loops, independent of the library's vectorized implementations.

#include <cmath>
#include <random>
#include <vector>

#include "dytad/tensor.hpp"

namespace oracles {

using dytad::Array64;

inline Array64 mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> vals) {
  Array64 m(rows, cols);
  Eigen::Index at = 0;
  for (double v : vals) m(at / cols, at % cols) = v, ++at;
  return m;
}

inline Array64 rand_array(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                          double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Array64 m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// Plain 1-D convolution, zero padding: kernel[o][i][s] taps input channel i
// at time t + offsets[s].
inline Array64 plain_conv(const Array64& x, const std::vector<std::vector<std::vector<double>>>& kernel,
                          const std::vector<int>& offsets, const std::vector<double>& bias = {}) {
  const auto c_out = static_cast<Eigen::Index>(kernel.size());
  const Eigen::Index c_in = x.rows(), tlen = x.cols();
  Array64 y = Array64::Zero(c_out, tlen);
  for (Eigen::Index o = 0; o < c_out; ++o)
    for (Eigen::Index t = 0; t < tlen; ++t) {
      double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(o)];
      for (Eigen::Index i = 0; i < c_in; ++i)
        for (size_t s = 0; s < offsets.size(); ++s) {
          Eigen::Index src = t + offsets[s];
          if (src >= 0 && src < tlen)
            acc += kernel[static_cast<size_t>(o)][static_cast<size_t>(i)][s] * x(i, src);
        }
      y(o, t) = acc;
    }
  return y;
}

inline double max_abs_diff(const Array64& a, const Array64& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1e300;
  return (a - b).abs().maxCoeff();
}

using Kernel3 = std::vector<std::vector<std::vector<double>>>;  // [C_out][C_in][k]

inline Kernel3 rand_kernel(std::mt19937_64& rng, int c_out, int c_in, int k) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Kernel3 kern(static_cast<size_t>(c_out));
  for (auto& per_out : kern) {
    per_out.resize(static_cast<size_t>(c_in));
    for (auto& per_in : per_out) {
      per_in.resize(static_cast<size_t>(k));
      for (auto& v : per_in) v = dist(rng);
    }
  }
  return kern;
}

// kernel[o][i][s] -> pointwise layout row o, column s*C_in+i
inline Array64 to_pointwise(const Kernel3& kern) {
  const auto c_out = static_cast<Eigen::Index>(kern.size());
  const auto c_in = static_cast<Eigen::Index>(kern[0].size());
  const auto k = static_cast<Eigen::Index>(kern[0][0].size());
  Array64 w(c_out, k * c_in);
  for (Eigen::Index o = 0; o < c_out; ++o)
    for (Eigen::Index i = 0; i < c_in; ++i)
      for (Eigen::Index s = 0; s < k; ++s)
        w(o, s * c_in + i) = kern[static_cast<size_t>(o)][static_cast<size_t>(i)][static_cast<size_t>(s)];
  return w;
}

// Per-timestamp single-tap convolution: at time t only tap[t] contributes.
inline Array64 gather_conv(const Array64& x, const Kernel3& kern, const std::vector<int>& offsets,
                           const std::vector<int>& tap) {
  const auto c_out = static_cast<Eigen::Index>(kern.size());
  const Eigen::Index c_in = x.rows(), tlen = x.cols();
  Array64 y = Array64::Zero(c_out, tlen);
  for (Eigen::Index t = 0; t < tlen; ++t) {
    const int s = tap[static_cast<size_t>(t)];
    const Eigen::Index src = t + offsets[static_cast<size_t>(s)];
    if (src < 0 || src >= tlen) continue;
    for (Eigen::Index o = 0; o < c_out; ++o)
      for (Eigen::Index i = 0; i < c_in; ++i)
        y(o, t) += kern[static_cast<size_t>(o)][static_cast<size_t>(i)][static_cast<size_t>(s)] * x(i, src);
  }
  return y;
}

}  // namespace oracles
