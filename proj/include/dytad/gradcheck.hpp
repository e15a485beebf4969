#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dytad/tensor.hpp"

namespace dytad {

// Central-difference gradient estimate of a deterministic scalar function.
template <typename S>
Array<S> finite_difference_grad(const std::function<S(const Array<S>&)>& f, const Array<S>& x,
                                S step) {
  Array<S> g(x.rows(), x.cols());
  Array<S> xp = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      xp(i, j) = x(i, j) + step;
      S fp = f(xp);
      xp(i, j) = x(i, j) - step;
      S fm = f(xp);
      xp(i, j) = x(i, j);
      g(i, j) = (fp - fm) / (S(2) * step);
    }
  }
  return g;
}

// relative error with denominator max(|a|, |b|, 1e-8)
template <typename S>
S max_rel_err(const Array<S>& a, const Array<S>& b) {
  DYTAD_REQUIRE(a.rows() == b.rows() && a.cols() == b.cols(), "max_rel_err: shape mismatch");
  S worst = S(0);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      S denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), S(1e-8)});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  return worst;
}

// Compare reverse-mode gradients of a rebuildable scalar graph against
// central finite differences, for every listed leaf. build_loss must read
// the leaves' current values each call.
template <typename S>
S check_gradients(const std::function<Var<S>()>& build_loss, const std::vector<Var<S>>& leaves,
                  S step = S(1e-5)) {
  for (auto leaf : leaves) leaf.clear_grad();
  Var<S> loss = build_loss();
  backward(loss);
  S worst = S(0);
  for (auto leaf : leaves) {
    Array<S> analytic = leaf.grad();
    Var<S> probe = leaf;  // shares the node; perturbations feed build_loss
    auto f = [&](const Array<S>& x) {
      Array<S> saved = probe.values_mut();
      probe.values_mut() = x;
      S out = build_loss().value()(0, 0);
      probe.values_mut() = saved;
      return out;
    };
    Array<S> numeric = finite_difference_grad<S>(f, probe.value(), step);
    worst = std::max(worst, max_rel_err(analytic, numeric));
  }
  return worst;
}

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

}  // namespace dytad
