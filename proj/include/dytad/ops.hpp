#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dytad/tensor.hpp"

namespace dytad {

namespace detail {

template <typename S>
Array<S> broadcast_to(const Array<S>& a, Eigen::Index r, Eigen::Index c) {
  if (a.rows() == r && a.cols() == c) return a;
  DYTAD_REQUIRE((a.rows() == r || a.rows() == 1) && (a.cols() == c || a.cols() == 1),
                "broadcast: incompatible shapes");
  return a.replicate(r / a.rows(), c / a.cols());
}

// Sum g over the dimensions that were broadcast to reach (g.rows, g.cols).
template <typename S>
Array<S> reduce_to(const Array<S>& g, Eigen::Index r, Eigen::Index c) {
  Array<S> out = g;
  if (r == 1 && g.rows() > 1) out = out.colwise().sum().eval();
  if (c == 1 && out.cols() > 1) out = out.rowwise().sum().eval();
  return out;
}

template <typename S>
std::pair<Eigen::Index, Eigen::Index> broadcast_shape(const Var<S>& a, const Var<S>& b) {
  Eigen::Index r = std::max(a.rows(), b.rows());
  Eigen::Index c = std::max(a.cols(), b.cols());
  DYTAD_REQUIRE((a.rows() == r || a.rows() == 1) && (b.rows() == r || b.rows() == 1) &&
                    (a.cols() == c || a.cols() == 1) && (b.cols() == c || b.cols() == 1),
                "elementwise op: shapes not broadcastable");
  return {r, c};
}

}  // namespace detail

// ---- elementwise arithmetic (with row/column/scalar broadcasting) ----

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  auto [r, c] = detail::broadcast_shape(a, b);
  Array<S> v = detail::broadcast_to(a.value(), r, c) + detail::broadcast_to(b.value(), r, c);
  return detail::make_op<S>(std::move(v), {a, b}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate(detail::reduce_to(n.grad, n.parents[0]->value.rows(), n.parents[0]->value.cols()));
    n.parents[1]->accumulate(detail::reduce_to(n.grad, n.parents[1]->value.rows(), n.parents[1]->value.cols()));
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  auto [r, c] = detail::broadcast_shape(a, b);
  Array<S> v = detail::broadcast_to(a.value(), r, c) - detail::broadcast_to(b.value(), r, c);
  return detail::make_op<S>(std::move(v), {a, b}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate(detail::reduce_to(n.grad, n.parents[0]->value.rows(), n.parents[0]->value.cols()));
    n.parents[1]->accumulate(detail::reduce_to<S>(-n.grad, n.parents[1]->value.rows(), n.parents[1]->value.cols()));
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  auto [r, c] = detail::broadcast_shape(a, b);
  Array<S> v = detail::broadcast_to(a.value(), r, c) * detail::broadcast_to(b.value(), r, c);
  const Eigen::Index rr = r, cc = c;
  return detail::make_op<S>(std::move(v), {a, b}, [rr, cc](detail::Node<S>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    n.parents[0]->accumulate(
        detail::reduce_to<S>(n.grad * detail::broadcast_to(bv, rr, cc), av.rows(), av.cols()));
    n.parents[1]->accumulate(
        detail::reduce_to<S>(n.grad * detail::broadcast_to(av, rr, cc), bv.rows(), bv.cols()));
  });
}

template <typename S>
Var<S> div(const Var<S>& a, const Var<S>& b) {
  auto [r, c] = detail::broadcast_shape(a, b);
  Array<S> v = detail::broadcast_to(a.value(), r, c) / detail::broadcast_to(b.value(), r, c);
  const Eigen::Index rr = r, cc = c;
  return detail::make_op<S>(std::move(v), {a, b}, [rr, cc](detail::Node<S>& n) {
    Array<S> av = detail::broadcast_to(n.parents[0]->value, rr, cc);
    Array<S> bv = detail::broadcast_to(n.parents[1]->value, rr, cc);
    n.parents[0]->accumulate(
        detail::reduce_to<S>(n.grad / bv, n.parents[0]->value.rows(), n.parents[0]->value.cols()));
    n.parents[1]->accumulate(detail::reduce_to<S>(-n.grad * av / (bv * bv), n.parents[1]->value.rows(),
                                                  n.parents[1]->value.cols()));
  });
}

template <typename S> Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }
template <typename S> Var<S> operator-(const Var<S>& a, const Var<S>& b) { return sub(a, b); }
template <typename S> Var<S> operator*(const Var<S>& a, const Var<S>& b) { return mul(a, b); }
template <typename S> Var<S> operator/(const Var<S>& a, const Var<S>& b) { return div(a, b); }
template <typename S> Var<S> operator+(const Var<S>& a, S s) { return add(a, Var<S>::scalar(s)); }
template <typename S> Var<S> operator-(const Var<S>& a, S s) { return sub(a, Var<S>::scalar(s)); }
template <typename S> Var<S> operator*(const Var<S>& a, S s) { return mul(a, Var<S>::scalar(s)); }
template <typename S> Var<S> operator*(S s, const Var<S>& a) { return mul(a, Var<S>::scalar(s)); }
template <typename S> Var<S> operator-(const Var<S>& a) { return mul(a, Var<S>::scalar(S(-1))); }

// ---- elementwise functions ----

template <typename S>
Var<S> relu(const Var<S>& x) {
  Array<S> v = x.value().max(S(0));
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate((n.parents[0]->value > S(0)).select(n.grad, Array<S>::Zero(n.grad.rows(), n.grad.cols())));
  });
}

template <typename S>
Var<S> sigmoid(const Var<S>& x) {
  Array<S> v = S(1) / (S(1) + (-x.value()).exp());
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate(n.grad * n.value * (S(1) - n.value));
  });
}

// max(0, tanh(x)); output range [0, 1)
template <typename S>
Var<S> restricted_tanh(const Var<S>& x) {
  Array<S> t = x.value().tanh();
  Array<S> v = t.max(S(0));
  return detail::make_op<S>(std::move(v), {x}, [t](detail::Node<S>& n) {
    n.parents[0]->accumulate((t > S(0)).select(n.grad * (S(1) - t * t), Array<S>::Zero(n.grad.rows(), n.grad.cols())));
  });
}

template <typename S>
Var<S> exp(const Var<S>& x) {
  Array<S> v = x.value().exp();
  return detail::make_op<S>(std::move(v), {x},
                            [](detail::Node<S>& n) { n.parents[0]->accumulate(n.grad * n.value); });
}

template <typename S>
Var<S> log(const Var<S>& x) {
  Array<S> v = x.value().log();
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate(n.grad / n.parents[0]->value);
  });
}

template <typename S>
Var<S> sqrt(const Var<S>& x) {
  Array<S> v = x.value().sqrt();
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate(n.grad * S(0.5) / n.value);
  });
}

template <typename S>
Var<S> square(const Var<S>& x) {
  Array<S> v = x.value().square();
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    n.parents[0]->accumulate(n.grad * S(2) * n.parents[0]->value);
  });
}

template <typename S>
Var<S> pow_scalar(const Var<S>& x, S p) {
  Array<S> v = x.value().pow(p);
  return detail::make_op<S>(std::move(v), {x}, [p](detail::Node<S>& n) {
    n.parents[0]->accumulate(n.grad * p * n.parents[0]->value.pow(p - S(1)));
  });
}

// Clamped values stop the gradient.
template <typename S>
Var<S> clamp_min(const Var<S>& x, S lo) {
  Array<S> v = x.value().max(lo);
  return detail::make_op<S>(std::move(v), {x}, [lo](detail::Node<S>& n) {
    n.parents[0]->accumulate((n.parents[0]->value > lo).select(n.grad, Array<S>::Zero(n.grad.rows(), n.grad.cols())));
  });
}

// ---- reductions ----

template <typename S>
Var<S> sum(const Var<S>& x) {
  Array<S> v(1, 1);
  v(0, 0) = x.value().sum();
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    n.parents[0]->accumulate(Array<S>::Constant(p.rows(), p.cols(), n.grad(0, 0)));
  });
}

template <typename S>
Var<S> mean(const Var<S>& x) {
  return sum(x) * (S(1) / S(x.value().size()));
}

// sum over the channel axis: CxT -> 1xT
template <typename S>
Var<S> sum_over_channels(const Var<S>& x) {
  Array<S> v = x.value().colwise().sum();
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    n.parents[0]->accumulate(n.grad.replicate(p.rows(), 1));
  });
}

template <typename S>
Var<S> mean_over_channels(const Var<S>& x) {
  return sum_over_channels(x) * (S(1) / S(x.value().rows()));
}

// sum over the time axis: CxT -> Cx1
template <typename S>
Var<S> sum_over_time(const Var<S>& x) {
  Array<S> v = x.value().rowwise().sum();
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    n.parents[0]->accumulate(n.grad.replicate(1, p.cols()));
  });
}

// per-timestamp softmax over channels; columns sum to 1
template <typename S>
Var<S> softmax_over_channels(const Var<S>& x) {
  Array<S> v = x.value();
  for (Eigen::Index t = 0; t < v.cols(); ++t) {
    auto col = v.col(t);
    col -= col.maxCoeff();
    col = col.exp();
    col /= col.sum();
  }
  return detail::make_op<S>(std::move(v), {x}, [](detail::Node<S>& n) {
    const Array<S>& y = n.value;
    Array<S> gy = n.grad * y;
    Array<S> dot = gy.colwise().sum();  // 1xT
    n.parents[0]->accumulate(gy - y * dot.replicate(y.rows(), 1));
  });
}

// ---- structural ops ----

template <typename S>
Var<S> slice_rows(const Var<S>& x, Eigen::Index r0, Eigen::Index nrows) {
  DYTAD_REQUIRE(r0 >= 0 && nrows >= 1 && r0 + nrows <= x.rows(), "slice_rows: range out of bounds");
  Array<S> v = x.value().middleRows(r0, nrows);
  return detail::make_op<S>(std::move(v), {x}, [r0, nrows](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    Array<S> g = Array<S>::Zero(p.rows(), p.cols());
    g.middleRows(r0, nrows) = n.grad;
    n.parents[0]->accumulate(g);
  });
}

template <typename S>
Var<S> slice_cols(const Var<S>& x, Eigen::Index c0, Eigen::Index ncols) {
  DYTAD_REQUIRE(c0 >= 0 && ncols >= 1 && c0 + ncols <= x.cols(), "slice_cols: range out of bounds");
  Array<S> v = x.value().middleCols(c0, ncols);
  return detail::make_op<S>(std::move(v), {x}, [c0, ncols](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    Array<S> g = Array<S>::Zero(p.rows(), p.cols());
    g.middleCols(c0, ncols) = n.grad;
    n.parents[0]->accumulate(g);
  });
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  DYTAD_REQUIRE(!parts.empty(), "concat_rows: empty input");
  Eigen::Index rows = 0, cols = parts[0].cols();
  for (const auto& p : parts) {
    DYTAD_REQUIRE(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Array<S> v(rows, cols);
  Eigen::Index at = 0;
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    sizes.push_back(p.rows());
    at += p.rows();
  }
  return detail::make_op<S>(std::move(v), parts, [sizes](detail::Node<S>& n) {
    Eigen::Index at = 0;
    for (size_t i = 0; i < sizes.size(); ++i) {
      n.parents[i]->accumulate(n.grad.middleRows(at, sizes[i]));
      at += sizes[i];
    }
  });
}

// vertical tiling: (m x T) -> (m*times x T)
template <typename S>
Var<S> tile_rows(const Var<S>& x, Eigen::Index times) {
  DYTAD_REQUIRE(times >= 1, "tile_rows: times must be >= 1");
  Array<S> v = x.value().replicate(times, 1);
  const Eigen::Index m = x.rows();
  return detail::make_op<S>(std::move(v), {x}, [times, m](detail::Node<S>& n) {
    Array<S> g = Array<S>::Zero(m, n.grad.cols());
    for (Eigen::Index i = 0; i < times; ++i) g += n.grad.middleRows(i * m, m);
    n.parents[0]->accumulate(g);
  });
}

template <typename S>
Var<S> select_cols(const Var<S>& x, std::vector<Eigen::Index> idx) {
  Array<S> v(x.rows(), static_cast<Eigen::Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) {
    DYTAD_REQUIRE(idx[j] >= 0 && idx[j] < x.cols(), "select_cols: index out of range");
    v.col(static_cast<Eigen::Index>(j)) = x.value().col(idx[j]);
  }
  return detail::make_op<S>(std::move(v), {x}, [idx = std::move(idx)](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    Array<S> g = Array<S>::Zero(p.rows(), p.cols());
    for (size_t j = 0; j < idx.size(); ++j) g.col(idx[j]) += n.grad.col(static_cast<Eigen::Index>(j));
    n.parents[0]->accumulate(g);
  });
}

// out[:, t] = x[:, t + offset] where valid, zero elsewhere
template <typename S>
Var<S> temporal_shift(const Var<S>& x, Eigen::Index offset) {
  const Eigen::Index tlen = x.cols();
  Array<S> v = Array<S>::Zero(x.rows(), tlen);
  Eigen::Index lo = std::max<Eigen::Index>(0, -offset);
  Eigen::Index hi = std::min<Eigen::Index>(tlen, tlen - offset);
  if (hi > lo) v.middleCols(lo, hi - lo) = x.value().middleCols(lo + offset, hi - lo);
  return detail::make_op<S>(std::move(v), {x}, [offset, lo, hi](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    Array<S> g = Array<S>::Zero(p.rows(), p.cols());
    if (hi > lo) g.middleCols(lo + offset, hi - lo) = n.grad.middleCols(lo, hi - lo);
    n.parents[0]->accumulate(g);
  });
}

// ---- linear maps, convolutions, resampling ----

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  DYTAD_REQUIRE(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  Array<S> v = (a.value().matrix() * b.value().matrix()).array();
  return detail::make_op<S>(std::move(v), {a, b}, [](detail::Node<S>& n) {
    const auto& av = n.parents[0]->value;
    const auto& bv = n.parents[1]->value;
    n.parents[0]->accumulate((n.grad.matrix() * bv.matrix().transpose()).array());
    n.parents[1]->accumulate((av.matrix().transpose() * n.grad.matrix()).array());
  });
}

// out[c,t] = sum_i weight[c,i] * x[i,t] (+ bias[c]); bias is C_out x 1
template <typename S>
Var<S> pointwise_conv(const Var<S>& x, const Var<S>& weight, const Var<S>& bias = {}) {
  DYTAD_REQUIRE(weight.cols() == x.rows(), "pointwise_conv: weight/input channel mismatch");
  Var<S> y = matmul(weight, x);
  if (bias.defined()) {
    DYTAD_REQUIRE(bias.rows() == weight.rows() && bias.cols() == 1,
                  "pointwise_conv: bias must be C_out x 1");
    y = add(y, bias);
  }
  return y;
}

// per-channel temporal convolution, zero padding, stride 1, odd kernel
template <typename S>
Var<S> depthwise_conv1d(const Var<S>& x, const Var<S>& weight) {
  const Eigen::Index ch = x.rows(), tlen = x.cols(), k = weight.cols();
  DYTAD_REQUIRE(k % 2 == 1, "depthwise_conv1d: kernel size must be odd");
  DYTAD_REQUIRE(weight.rows() == ch, "depthwise_conv1d: channel mismatch");
  const Eigen::Index half = k / 2;
  Array<S> v = Array<S>::Zero(ch, tlen);
  const auto& xv = x.value();
  const auto& wv = weight.value();
  for (Eigen::Index s = 0; s < k; ++s) {
    Eigen::Index off = s - half;
    Eigen::Index lo = std::max<Eigen::Index>(0, -off);
    Eigen::Index hi = std::min<Eigen::Index>(tlen, tlen - off);
    if (hi <= lo) continue;
    v.middleCols(lo, hi - lo) += xv.middleCols(lo + off, hi - lo).colwise() * wv.col(s);
  }
  return detail::make_op<S>(std::move(v), {x, weight}, [k, half](detail::Node<S>& n) {
    const auto& xv = n.parents[0]->value;
    const auto& wv = n.parents[1]->value;
    const Eigen::Index tlen = xv.cols();
    Array<S> gx = Array<S>::Zero(xv.rows(), xv.cols());
    Array<S> gw = Array<S>::Zero(wv.rows(), wv.cols());
    for (Eigen::Index s = 0; s < k; ++s) {
      Eigen::Index off = s - half;
      Eigen::Index lo = std::max<Eigen::Index>(0, -off);
      Eigen::Index hi = std::min<Eigen::Index>(tlen, tlen - off);
      if (hi <= lo) continue;
      gx.middleCols(lo + off, hi - lo) += n.grad.middleCols(lo, hi - lo).colwise() * wv.col(s);
      gw.col(s) += (n.grad.middleCols(lo, hi - lo) * xv.middleCols(lo + off, hi - lo)).rowwise().sum();
    }
    n.parents[0]->accumulate(gx);
    n.parents[1]->accumulate(gw);
  });
}

// pairwise temporal max, scale 2; a dangling final element passes through
template <typename S>
Var<S> max_pool_ds2(const Var<S>& x) {
  const Eigen::Index ch = x.rows(), tlen = x.cols();
  DYTAD_REQUIRE(tlen >= 1, "max_pool_ds2: empty input");
  const Eigen::Index out_t = (tlen + 1) / 2;
  Array<S> v(ch, out_t);
  std::vector<Eigen::Index> arg(static_cast<size_t>(ch * out_t));
  const auto& xv = x.value();
  for (Eigen::Index c = 0; c < ch; ++c) {
    for (Eigen::Index j = 0; j < out_t; ++j) {
      Eigen::Index t0 = 2 * j;
      if (t0 + 1 < tlen && xv(c, t0 + 1) > xv(c, t0)) {
        v(c, j) = xv(c, t0 + 1);
        arg[static_cast<size_t>(c * out_t + j)] = t0 + 1;
      } else {
        v(c, j) = xv(c, t0);
        arg[static_cast<size_t>(c * out_t + j)] = t0;
      }
    }
  }
  return detail::make_op<S>(std::move(v), {x}, [arg = std::move(arg), out_t](detail::Node<S>& n) {
    const auto& p = n.parents[0]->value;
    Array<S> g = Array<S>::Zero(p.rows(), p.cols());
    for (Eigen::Index c = 0; c < p.rows(); ++c)
      for (Eigen::Index j = 0; j < out_t; ++j)
        g(c, arg[static_cast<size_t>(c * out_t + j)]) += n.grad(c, j);
    n.parents[0]->accumulate(g);
  });
}

namespace detail {

// source position for output index j when resampling T -> target
template <typename S>
S upsample_src_pos(Eigen::Index j, Eigen::Index tlen, Eigen::Index target) {
  if (target == 2 * tlen - 1) return tlen == 1 ? S(0) : S(j) / S(2);
  return (S(j) + S(0.5)) * S(tlen) / S(target) - S(0.5);
}

}  // namespace detail

// linear interpolation along time to target_T in {2T-1, 2T}; edges replicate
template <typename S>
Var<S> linear_upsample_x2(const Var<S>& x, Eigen::Index target_t) {
  const Eigen::Index ch = x.rows(), tlen = x.cols();
  DYTAD_REQUIRE(target_t == 2 * tlen || target_t == 2 * tlen - 1,
                "linear_upsample_x2: target length must be 2T or 2T-1");
  Array<S> v(ch, target_t);
  std::vector<Eigen::Index> i0(static_cast<size_t>(target_t)), i1(static_cast<size_t>(target_t));
  std::vector<S> w1(static_cast<size_t>(target_t));
  for (Eigen::Index j = 0; j < target_t; ++j) {
    S p = detail::upsample_src_pos<S>(j, tlen, target_t);
    Eigen::Index lo = static_cast<Eigen::Index>(std::floor(p));
    S frac = p - S(lo);
    i0[static_cast<size_t>(j)] = std::clamp<Eigen::Index>(lo, 0, tlen - 1);
    i1[static_cast<size_t>(j)] = std::clamp<Eigen::Index>(lo + 1, 0, tlen - 1);
    w1[static_cast<size_t>(j)] = frac;
    v.col(j) = (S(1) - frac) * x.value().col(i0[static_cast<size_t>(j)]) +
               frac * x.value().col(i1[static_cast<size_t>(j)]);
  }
  return detail::make_op<S>(
      std::move(v), {x},
      [i0 = std::move(i0), i1 = std::move(i1), w1 = std::move(w1), target_t](detail::Node<S>& n) {
        const auto& p = n.parents[0]->value;
        Array<S> g = Array<S>::Zero(p.rows(), p.cols());
        for (Eigen::Index j = 0; j < target_t; ++j) {
          g.col(i0[static_cast<size_t>(j)]) += (S(1) - w1[static_cast<size_t>(j)]) * n.grad.col(j);
          g.col(i1[static_cast<size_t>(j)]) += w1[static_cast<size_t>(j)] * n.grad.col(j);
        }
        n.parents[0]->accumulate(g);
      });
}

// ---- normalization ----

inline constexpr double kNormEps = 1e-5;

// per-timestamp normalization over channels, then affine; gain/offset are Cx1
template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& offset) {
  DYTAD_REQUIRE(gain.rows() == x.rows() && gain.cols() == 1 && offset.rows() == x.rows() &&
                    offset.cols() == 1,
                "layer_norm: gain/offset must be C x 1");
  Var<S> mu = mean_over_channels(x);
  Var<S> xc = sub(x, mu);
  Var<S> var = mean_over_channels(square(xc));
  Var<S> inv = pow_scalar(var + S(kNormEps), S(-0.5));
  return add(mul(mul(xc, inv), gain), offset);
}

// per-group normalization over (C/groups) channels and all timestamps
template <typename S>
Var<S> group_norm(const Var<S>& x, int groups, const Var<S>& gain, const Var<S>& offset) {
  DYTAD_REQUIRE(groups >= 1 && x.rows() % groups == 0,
                "group_norm: channel count not divisible by groups");
  const Eigen::Index gc = x.rows() / groups;
  std::vector<Var<S>> parts;
  parts.reserve(static_cast<size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    Var<S> part = slice_rows(x, g * gc, gc);
    Var<S> mu = mean(part);
    Var<S> ctr = sub(part, mu);
    Var<S> var = mean(square(ctr));
    parts.push_back(mul(ctr, pow_scalar(var + S(kNormEps), S(-0.5))));
  }
  Var<S> normed = groups == 1 ? parts[0] : concat_rows(parts);
  return add(mul(normed, gain), offset);
}

}  // namespace dytad
