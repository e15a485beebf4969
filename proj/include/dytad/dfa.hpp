#pragma once

#include <cmath>
#include <vector>

#include "dytad/ops.hpp"
#include "dytad/tensor.hpp"

namespace dytad {

// Mask formation: how many mask channels drive the shifted stack.
//   K  : one mask row per kernel tap, shared across channels (C_m = k)
//   C  : one mask row per channel, shared across taps (C_m = C_in)
//   CK : independent mask entry per tap and channel (C_m = k * C_in)
enum class Formation { K, C, CK };

// Identity skips the gate (degeneracy probe); it forfeits the mask's
// nonnegativity guarantee and is not used by any model configuration.
enum class Gate { Relu, RestrictedTanh, Identity };

inline int mask_channels(Formation f, int c_in, int k) {
  switch (f) {
    case Formation::K: return k;
    case Formation::C: return c_in;
    case Formation::CK: return k * c_in;
  }
  return 0;
}

template <typename S>
Var<S> apply_gate(const Var<S>& x, Gate g) {
  switch (g) {
    case Gate::Relu: return relu(x);
    case Gate::RestrictedTanh: return restricted_tanh(x);
    case Gate::Identity: return x;
  }
  fail("apply_gate: unknown gate");
}

// Temporal offsets of the k taps. window == 1 keeps the contiguous
// [-k/2, k/2] footprint; window > 1 dilates the taps so they span
// window*(k+1) timestamps.
inline std::vector<int> shift_offsets(int k, int window) {
  DYTAD_REQUIRE(k >= 1 && k % 2 == 1, "shift: kernel size must be odd");
  DYTAD_REQUIRE(window >= 1, "shift: window factor must be positive");
  std::vector<int> offsets(static_cast<size_t>(k));
  if (k == 1) return {0};
  if (window == 1) {
    for (int s = 0; s < k; ++s) offsets[static_cast<size_t>(s)] = s - k / 2;
    return offsets;
  }
  double half_span = window * (k + 1) / 2.0;
  for (int s = 0; s < k; ++s) {
    double pos = -half_span + s * (2.0 * half_span) / (k - 1);
    offsets[static_cast<size_t>(s)] = static_cast<int>(std::round(pos));
  }
  return offsets;
}

// Stacked shifted copies of the input; block s occupies rows
// [s*C_in, (s+1)*C_in) and holds the input advanced by offsets[s],
// zero-padded out of range.
template <typename S>
struct ShiftedStack {
  Var<S> data;  // (k*C_in) x T
  int k = 0;
  int c_in = 0;
  std::vector<int> offsets;
};

template <typename S>
ShiftedStack<S> shift(const Var<S>& f, int k, int window = 1) {
  auto offsets = shift_offsets(k, window);
  ShiftedStack<S> out;
  out.k = k;
  out.c_in = static_cast<int>(f.rows());
  out.offsets = offsets;
  if (k == 1) {
    out.data = f;
    return out;
  }
  std::vector<Var<S>> blocks;
  blocks.reserve(offsets.size());
  for (int off : offsets) blocks.push_back(temporal_shift(f, off));
  out.data = concat_rows(blocks);
  return out;
}

// Parameters of one dynamic feature aggregation operator. The kernel is
// stored in pointwise layout: depthwise (C x k), otherwise
// (C_out x k*C_in) with column s*C_in+i holding tap s of input channel i.
template <typename S>
struct DfaParams {
  int c_in = 0;
  int c_out = 0;
  int k = 3;
  Formation formation = Formation::K;
  Gate gate = Gate::Relu;
  int window = 1;
  bool depthwise = false;
  int psi_kernel = 3;

  Var<S> kernel;
  Var<S> bias;         // optional, C_out x 1
  Var<S> psi_dw;       // C_in x psi_kernel
  Var<S> psi_dw_bias;  // C_in x 1
  Var<S> psi_pw;       // C_m x C_in, present iff C_m != C_in
  Var<S> psi_pw_bias;  // C_m x 1

  int mask_rows() const { return mask_channels(formation, c_in, k); }
};

// M = gate(psi(f)): depthwise conv over f, then a pointwise projection
// whenever the formation needs a different channel count.
template <typename S>
Var<S> make_mask(const Var<S>& f, const DfaParams<S>& p) {
  Var<S> h = add(depthwise_conv1d(f, p.psi_dw), p.psi_dw_bias);
  if (p.psi_pw.defined()) h = pointwise_conv(h, p.psi_pw, p.psi_pw_bias);
  return apply_gate(h, p.gate);
}

// Expand a C_m x T mask to the k*C_in x T layout of the shifted stack.
template <typename S>
Var<S> upsample_mask(const Var<S>& mask, Formation formation, int c_in, int k) {
  switch (formation) {
    case Formation::K: {
      DYTAD_REQUIRE(mask.rows() == k, "upsample_mask: K formation needs k rows");
      std::vector<Var<S>> blocks;
      blocks.reserve(static_cast<size_t>(k));
      for (int s = 0; s < k; ++s) blocks.push_back(tile_rows(slice_rows(mask, s, 1), c_in));
      return k == 1 && c_in == 1 ? blocks[0] : concat_rows(blocks);
    }
    case Formation::C:
      DYTAD_REQUIRE(mask.rows() == c_in, "upsample_mask: C formation needs C_in rows");
      return k == 1 ? mask : tile_rows(mask, k);
    case Formation::CK:
      DYTAD_REQUIRE(mask.rows() == static_cast<Eigen::Index>(k) * c_in,
                    "upsample_mask: CK formation needs k*C_in rows");
      return mask;
  }
  fail("upsample_mask: unknown formation");
}

namespace detail {

// y[c,t] = sum_s kernel[c,s] * stack[s*C+c, t]
template <typename S>
Var<S> depthwise_aggregate(const Var<S>& stack, const Var<S>& kernel, int k, int c) {
  Var<S> y;
  for (int s = 0; s < k; ++s) {
    Var<S> term = mul(slice_rows(stack, s * c, c), slice_cols(kernel, s, 1));
    y = y.defined() ? add(y, term) : term;
  }
  return y;
}

}  // namespace detail

// Masked shifted aggregation: y = sum_s K_s (M_block_s ⊙ f_shift_s).
// With an all-ones mask this is exactly the plain k-tap convolution.
template <typename S>
Var<S> dfa_conv(const Var<S>& f, const DfaParams<S>& p) {
  DYTAD_REQUIRE(f.rows() == p.c_in, "dfa_conv: input channel mismatch");
  ShiftedStack<S> stack = shift(f, p.k, p.window);
  Var<S> mask = make_mask(f, p);
  Var<S> full = upsample_mask(mask, p.formation, p.c_in, p.k);
  Var<S> masked = mul(stack.data, full);
  if (p.depthwise) {
    DYTAD_REQUIRE(p.c_out == p.c_in, "dfa_conv: depthwise requires C_out == C_in");
    Var<S> y = detail::depthwise_aggregate(masked, p.kernel, p.k, p.c_in);
    return p.bias.defined() ? add(y, p.bias) : y;
  }
  return pointwise_conv(masked, p.kernel, p.bias);
}

inline constexpr double kAttEps = 1e-8;

// Attention formation: per-tap gated scores are sum-normalized per
// timestamp, so exact zeros stay zero and all-zero columns give zero
// output. Depthwise only. The normalized attention is exposed through
// att_out for diagnostics.
template <typename S>
Var<S> dfa_att(const Var<S>& f, const DfaParams<S>& p, Array<S>* att_out = nullptr) {
  DYTAD_REQUIRE(p.depthwise && p.c_out == p.c_in, "dfa_att: depthwise operation only");
  DYTAD_REQUIRE(p.formation == Formation::K, "dfa_att: scores are per tap (K formation)");
  DYTAD_REQUIRE(f.rows() == p.c_in, "dfa_att: input channel mismatch");
  Var<S> gates = make_mask(f, p);  // k x T, nonnegative
  Var<S> att = div(gates, add(sum_over_channels(gates), Var<S>::scalar(S(kAttEps))));
  if (att_out) *att_out = att.value();
  ShiftedStack<S> stack = shift(f, p.k, p.window);
  Var<S> y;
  for (int s = 0; s < p.k; ++s) {
    Var<S> block = p.k == 1 ? stack.data : slice_rows(stack.data, s * p.c_in, p.c_in);
    Var<S> term = mul(mul(block, slice_rows(att, s, 1)), slice_cols(p.kernel, s, 1));
    y = y.defined() ? add(y, term) : term;
  }
  return p.bias.defined() ? add(y, p.bias) : y;
}

}  // namespace dytad
