#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dytad/dfa.hpp"
#include "dytad/gradcheck.hpp"
#include "oracles.hpp"

using namespace dytad;
using oracles::mat;
using oracles::max_abs_diff;
using oracles::rand_array;

namespace {

// Randomly initialized operator; all tensors are parameters so gradient
// checks cover the Ψ path too.
DfaParams<double> make_dfa(std::mt19937_64& rng, int c_in, int c_out, int k, Formation formation,
                           Gate gate = Gate::Relu, int window = 1, bool depthwise = false,
                           bool with_bias = false) {
  DfaParams<double> p;
  p.c_in = c_in;
  p.c_out = c_out;
  p.k = k;
  p.formation = formation;
  p.gate = gate;
  p.window = window;
  p.depthwise = depthwise;
  p.kernel = Var<double>::param(depthwise ? rand_array(rng, c_in, k) : rand_array(rng, c_out, k * c_in));
  if (with_bias) p.bias = Var<double>::param(rand_array(rng, c_out, 1));
  p.psi_dw = Var<double>::param(rand_array(rng, c_in, p.psi_kernel));
  p.psi_dw_bias = Var<double>::param(rand_array(rng, c_in, 1));
  const int c_m = p.mask_rows();
  if (c_m != c_in) {
    p.psi_pw = Var<double>::param(rand_array(rng, c_m, c_in));
    p.psi_pw_bias = Var<double>::param(rand_array(rng, c_m, 1));
  }
  return p;
}

// Force Ψ to a constant output: all weights zero, final-stage bias = value.
void set_constant_mask(DfaParams<double>& p, const Array64& bias_per_row) {
  p.psi_dw.values_mut().setZero();
  p.psi_dw_bias.values_mut().setZero();
  if (p.psi_pw.defined()) {
    p.psi_pw.values_mut().setZero();
    p.psi_pw_bias.values_mut() = bias_per_row;
  } else {
    p.psi_dw_bias.values_mut() = bias_per_row;
  }
}

// Rewire Ψ so the mask equals rows [row0, row0+C_m) of the input verbatim:
// depthwise kernel size 1 identity, pointwise selector. Lets tests drive
// dfa_conv with arbitrary per-timestamp masks through control channels.
void set_selector_mask(DfaParams<double>& p, int row0) {
  p.psi_kernel = 1;
  p.psi_dw = Var<double>::param(Array64::Ones(p.c_in, 1));
  p.psi_dw_bias = Var<double>::param(Array64::Zero(p.c_in, 1));
  const int c_m = p.mask_rows();
  Array64 sel = Array64::Zero(c_m, p.c_in);
  for (int r = 0; r < c_m; ++r) sel(r, row0 + r) = 1.0;
  p.psi_pw = Var<double>::param(sel);
  p.psi_pw_bias = Var<double>::param(Array64::Zero(c_m, 1));
}

std::vector<std::vector<double>> depthwise_rows(const Array64& w) {
  std::vector<std::vector<double>> rows(static_cast<size_t>(w.rows()));
  for (Eigen::Index c = 0; c < w.rows(); ++c) {
    rows[static_cast<size_t>(c)].resize(static_cast<size_t>(w.cols()));
    for (Eigen::Index s = 0; s < w.cols(); ++s) rows[static_cast<size_t>(c)][static_cast<size_t>(s)] = w(c, s);
  }
  return rows;
}

}  // namespace

TEST_CASE("shift offsets") {
  CHECK(shift_offsets(1, 1) == std::vector<int>{0});
  CHECK(shift_offsets(3, 1) == std::vector<int>{-1, 0, 1});
  CHECK(shift_offsets(5, 1) == std::vector<int>{-2, -1, 0, 1, 2});
  // dilated placement spans w*(k+1) timestamps
  CHECK(shift_offsets(3, 5) == std::vector<int>{-10, 0, 10});
  CHECK(shift_offsets(5, 2) == std::vector<int>{-6, -3, 0, 3, 6});
  CHECK_THROWS_AS(shift_offsets(2, 1), std::invalid_argument);
  CHECK_THROWS_AS(shift_offsets(3, 0), std::invalid_argument);
}

TEST_CASE("shift stack layout") {
  auto f = Var<double>::constant(mat(1, 4, {1, 2, 3, 4}));
  auto st = shift(f, 3);
  CHECK(max_abs_diff(st.data.value(),
                     mat(3, 4, {0, 1, 2, 3, 1, 2, 3, 4, 2, 3, 4, 0})) == 0.0);

  auto st1 = shift(f, 1);
  CHECK(max_abs_diff(st1.data.value(), f.value()) == 0.0);

  // two channels: block s holds both channels shifted together
  auto g = Var<double>::constant(mat(2, 3, {1, 2, 3, 4, 5, 6}));
  auto st2 = shift(g, 3);
  CHECK(st2.data.rows() == 6);
  CHECK(max_abs_diff(st2.data.value(),
                     mat(6, 3, {0, 1, 2, 0, 4, 5, 1, 2, 3, 4, 5, 6, 2, 3, 0, 5, 6, 0})) == 0.0);
}

TEST_CASE("make_mask constant generators") {
  std::mt19937_64 rng(11);
  auto f = Var<double>::constant(rand_array(rng, 2, 5));

  auto p = make_dfa(rng, 2, 3, 3, Formation::K);
  set_constant_mask(p, Array64::Ones(3, 1));
  CHECK(max_abs_diff(make_mask(f, p).value(), Array64::Ones(3, 5)) == 0.0);

  set_constant_mask(p, Array64::Constant(3, 1, -1.0));
  CHECK(make_mask(f, p).value().abs().maxCoeff() == 0.0);

  p.gate = Gate::RestrictedTanh;
  set_constant_mask(p, Array64::Constant(3, 1, 10.0));
  CHECK(max_abs_diff(make_mask(f, p).value(), Array64::Constant(3, 5, std::tanh(10.0))) <= 1e-12);
  CHECK(std::abs(std::tanh(10.0) - 1.0) <= 1e-8);  // saturation

  // mask row counts per formation
  CHECK(make_dfa(rng, 2, 3, 5, Formation::K).mask_rows() == 5);
  CHECK(make_dfa(rng, 2, 3, 5, Formation::C).mask_rows() == 2);
  CHECK(make_dfa(rng, 2, 3, 5, Formation::CK).mask_rows() == 10);
}

TEST_CASE("upsample_mask layouts") {
  auto m = Var<double>::constant(mat(3, 2, {1, 2, 3, 4, 5, 6}));
  Array64 up = upsample_mask(m, Formation::K, 2, 3).value();
  CHECK(max_abs_diff(up, mat(6, 2, {1, 2, 1, 2, 3, 4, 3, 4, 5, 6, 5, 6})) == 0.0);

  auto mc = Var<double>::constant(mat(2, 2, {1, 2, 3, 4}));
  Array64 upc = upsample_mask(mc, Formation::C, 2, 3).value();
  CHECK(max_abs_diff(upc, mat(6, 2, {1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4})) == 0.0);

  std::mt19937_64 rng(12);
  auto mck = Var<double>::constant(rand_array(rng, 6, 2));
  CHECK(max_abs_diff(upsample_mask(mck, Formation::CK, 2, 3).value(), mck.value()) == 0.0);

  CHECK_THROWS_AS(upsample_mask(mc, Formation::K, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(upsample_mask(m, Formation::C, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(upsample_mask(m, Formation::CK, 2, 3), std::invalid_argument);
}

TEST_CASE("dfa_conv all-ones mask equals plain convolution") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> cdist(1, 4), tdist(4, 20), kpick(0, 2), fpick(0, 2);
  const int ks[3] = {1, 3, 5};
  for (int trial = 0; trial < 30; ++trial) {
    const int c_in = cdist(rng), c_out = cdist(rng), k = ks[kpick(rng)], tlen = tdist(rng);
    const auto formation = static_cast<Formation>(fpick(rng));
    auto p = make_dfa(rng, c_in, c_out, k, formation, Gate::Relu, 1, false, true);
    set_constant_mask(p, Array64::Ones(p.mask_rows(), 1));

    auto kern = oracles::rand_kernel(rng, c_out, c_in, k);
    p.kernel.values_mut() = oracles::to_pointwise(kern);
    std::vector<double> bias(static_cast<size_t>(c_out));
    for (int o = 0; o < c_out; ++o) bias[static_cast<size_t>(o)] = p.bias.value()(o, 0);

    auto f = Var<double>::constant(rand_array(rng, c_in, tlen));
    Array64 want = oracles::plain_conv(f.value(), kern, shift_offsets(k, 1), bias);
    CHECK(max_abs_diff(dfa_conv(f, p).value(), want) <= 1e-10);
  }
}

TEST_CASE("dfa_conv window dilation against plain convolution") {
  std::mt19937_64 rng(14);
  for (int window : {2, 5}) {
    auto p = make_dfa(rng, 2, 3, 3, Formation::C, Gate::Relu, window);
    set_constant_mask(p, Array64::Ones(p.mask_rows(), 1));
    auto kern = oracles::rand_kernel(rng, 3, 2, 3);
    p.kernel.values_mut() = oracles::to_pointwise(kern);
    auto f = Var<double>::constant(rand_array(rng, 2, 30));
    Array64 want = oracles::plain_conv(f.value(), kern, shift_offsets(3, window));
    CHECK(max_abs_diff(dfa_conv(f, p).value(), want) <= 1e-10);
  }
}

TEST_CASE("dfa_conv center-row-zeroed fixture") {
  std::mt19937_64 rng(15);
  auto p = make_dfa(rng, 1, 1, 3, Formation::K);
  p.kernel.values_mut() = mat(1, 3, {1, 1, 1});
  Array64 rows(3, 1);
  rows << 1, -1, 1;  // relu zeroes the center tap
  set_constant_mask(p, rows);
  auto f = Var<double>::constant(mat(1, 4, {1, 2, 3, 4}));
  CHECK(max_abs_diff(dfa_conv(f, p).value(), mat(1, 4, {2, 4, 6, 3})) == 0.0);
}

// A binary K-formation mask with exactly one active tap per timestamp turns
// dfa_conv into a per-timestamp gather. Each output coefficient is then a
// sum of exact zeros plus the active tap's contribution, so the depthwise
// path (and the dense path with a single data channel) is bit-exact against
// the gather oracle. Masks are driven through control channels that Ψ
// selects verbatim.
TEST_CASE("dfa_conv deformable single-tap equivalence (depthwise, exact)") {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> tapdist(0, 2);
  const int c_data = 2, k = 3, tlen = 12, c_in = c_data + k;
  for (int trial = 0; trial < 10; ++trial) {
    auto p = make_dfa(rng, c_in, c_in, k, Formation::K, Gate::Relu, 1, true);
    set_selector_mask(p, c_data);

    std::vector<int> tap(tlen);
    Array64 fx = rand_array(rng, c_in, tlen);
    fx.bottomRows(k).setZero();
    for (int t = 0; t < tlen; ++t) {
      tap[static_cast<size_t>(t)] = tapdist(rng);
      fx(c_data + tap[static_cast<size_t>(t)], t) = 1.0;  // one-hot tap selector
    }
    // depthwise kernel rows as a diagonal multi-channel kernel
    oracles::Kernel3 kern(static_cast<size_t>(c_in));
    for (int c = 0; c < c_in; ++c) {
      kern[static_cast<size_t>(c)].assign(static_cast<size_t>(c_in), std::vector<double>(k, 0.0));
      kern[static_cast<size_t>(c)][static_cast<size_t>(c)] = depthwise_rows(p.kernel.value())[static_cast<size_t>(c)];
    }
    auto f = Var<double>::constant(fx);
    Array64 want = oracles::gather_conv(fx, kern, shift_offsets(k, 1), tap);
    CHECK(max_abs_diff(dfa_conv(f, p).value(), want) == 0.0);
  }
}

TEST_CASE("dfa_conv deformable single-tap equivalence (dense, one data channel)") {
  std::mt19937_64 rng(36);
  std::uniform_int_distribution<int> tapdist(0, 4);
  const int c_data = 1, k = 5, tlen = 16, c_in = c_data + k;
  for (int trial = 0; trial < 10; ++trial) {
    auto p = make_dfa(rng, c_in, 3, k, Formation::K);
    set_selector_mask(p, c_data);
    auto kern = oracles::rand_kernel(rng, 3, c_in, k);
    // aggregation must not read the control channels
    for (auto& per_out : kern)
      for (size_t i = static_cast<size_t>(c_data); i < per_out.size(); ++i)
        per_out[i].assign(static_cast<size_t>(k), 0.0);
    p.kernel.values_mut() = oracles::to_pointwise(kern);

    std::vector<int> tap(tlen);
    Array64 fx = rand_array(rng, c_in, tlen);
    fx.bottomRows(k).setZero();
    for (int t = 0; t < tlen; ++t) {
      tap[static_cast<size_t>(t)] = tapdist(rng);
      fx(c_data + tap[static_cast<size_t>(t)], t) = 1.0;
    }
    auto f = Var<double>::constant(fx);
    Array64 want = oracles::gather_conv(fx, kern, shift_offsets(k, 1), tap);
    CHECK(max_abs_diff(dfa_conv(f, p).value(), want) == 0.0);
  }
}

TEST_CASE("dfa_conv masking monotonicity") {
  // zeroing one more mask entry (tap s0 at time t0) only changes column t0
  std::mt19937_64 rng(17);
  const int c_data = 1, k = 3, tlen = 8, c_in = c_data + k;
  auto p = make_dfa(rng, c_in, 2, k, Formation::K);
  set_selector_mask(p, c_data);
  // the aggregation must ignore the control channels, otherwise editing a
  // mask entry also perturbs the data path
  for (Eigen::Index o = 0; o < 2; ++o)
    for (int s = 0; s < k; ++s)
      for (int i = c_data; i < c_in; ++i) p.kernel.values_mut()(o, s * c_in + i) = 0.0;
  Array64 fx = rand_array(rng, c_in, tlen);
  fx.bottomRows(k) = rand_array(rng, k, tlen, 0.2, 1.0);  // positive masks
  Array64 base = dfa_conv(Var<double>::constant(fx), p).value();

  const int s0 = 1, t0 = 5;
  Array64 fz = fx;
  fz(c_data + s0, t0) = 0.0;
  Array64 zeroed = dfa_conv(Var<double>::constant(fz), p).value();
  for (Eigen::Index t = 0; t < tlen; ++t) {
    if (t == t0) continue;
    CHECK((base.col(t) - zeroed.col(t)).abs().maxCoeff() == 0.0);
  }
  CHECK((base.col(t0) - zeroed.col(t0)).abs().maxCoeff() > 0.0);
}

TEST_CASE("dfa_conv degeneracies") {
  std::mt19937_64 rng(18);
  // identity gate: shapes unchanged
  auto p = make_dfa(rng, 2, 3, 3, Formation::CK, Gate::Identity);
  auto f = Var<double>::constant(rand_array(rng, 2, 6));
  auto y = dfa_conv(f, p);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == 6);

  // constant Ψ: operator is linear in f (no bias)
  auto pl = make_dfa(rng, 2, 3, 3, Formation::K);
  set_constant_mask(pl, mat(3, 1, {0.5, 1.5, 0.25}));
  Array64 xa = rand_array(rng, 2, 6), xb = rand_array(rng, 2, 6);
  const double a = 1.7, b = -0.6;
  Array64 lhs = dfa_conv(Var<double>::constant(a * xa + b * xb), pl).value();
  Array64 rhs = a * dfa_conv(Var<double>::constant(xa), pl).value() +
                b * dfa_conv(Var<double>::constant(xb), pl).value();
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("dfa_conv depthwise matches per-channel convolution") {
  std::mt19937_64 rng(19);
  auto p = make_dfa(rng, 3, 3, 3, Formation::K, Gate::Relu, 1, true, true);
  set_constant_mask(p, Array64::Ones(3, 1));
  auto f = Var<double>::constant(rand_array(rng, 3, 10));
  // oracle: depthwise == per-channel plain conv
  auto rows = depthwise_rows(p.kernel.value());
  Array64 want(3, 10);
  for (int c = 0; c < 3; ++c) {
    Array64 xc = f.value().row(c);
    oracles::Kernel3 kc = {{rows[static_cast<size_t>(c)]}};
    want.row(c) = oracles::plain_conv(xc, kc, shift_offsets(3, 1)).row(0) + p.bias.value()(c, 0);
  }
  CHECK(max_abs_diff(dfa_conv(f, p).value(), want) <= 1e-12);
}

TEST_CASE("dfa_att uniform and routing fixtures") {
  std::mt19937_64 rng(20);
  const int c = 2, k = 3, tlen = 6;

  // equal positive gates -> uniform attention
  auto p = make_dfa(rng, c, c, k, Formation::K, Gate::Relu, 1, true);
  set_constant_mask(p, Array64::Ones(k, 1));
  Array64 att;
  auto f = Var<double>::constant(rand_array(rng, c, tlen));
  dfa_att(f, p, &att);
  CHECK(max_abs_diff(att, Array64::Constant(k, tlen, 1.0 / k)) <= 1e-6);
  for (Eigen::Index t = 0; t < tlen; ++t) CHECK(std::abs(att.col(t).sum() - 1.0) <= 1e-6);

  // center-tap-only gate with unit kernel routes the input through
  auto pr = make_dfa(rng, c, c, k, Formation::K, Gate::Relu, 1, true);
  Array64 sel(k, 1);
  sel << -1, 1, -1;
  set_constant_mask(pr, sel);
  pr.kernel.values_mut().setOnes();
  CHECK(max_abs_diff(dfa_att(f, pr).value(), f.value()) <= 1e-6);

  // all-zero gates -> zero output
  set_constant_mask(pr, Array64::Constant(k, 1, -1.0));
  CHECK(dfa_att(f, pr).value().abs().maxCoeff() == 0.0);
}

TEST_CASE("dfa_att per-timestamp zero column") {
  std::mt19937_64 rng(21);
  const int c_data = 2, k = 3, tlen = 5, c_in = c_data + k;
  auto p = make_dfa(rng, c_in, c_in, k, Formation::K, Gate::Relu, 1, true);
  set_selector_mask(p, c_data);
  Array64 fx = rand_array(rng, c_in, tlen);
  fx.bottomRows(k) = rand_array(rng, k, tlen, 0.5, 1.0);
  fx.bottomRows(k).col(2).setZero();  // no active tap at t=2
  Array64 att;
  Array64 y = dfa_att(Var<double>::constant(fx), p, &att).value();
  CHECK(y.col(2).abs().maxCoeff() == 0.0);
  CHECK(att.col(2).abs().maxCoeff() == 0.0);
  for (Eigen::Index t = 0; t < tlen; ++t) {
    if (t == 2) continue;
    CHECK(std::abs(att.col(t).sum() - 1.0) <= 1e-6);
  }
}

TEST_CASE("dfa gradient checks") {
  std::mt19937_64 rng(22);
  const double tol = 1e-4;

  for (auto formation : {Formation::K, Formation::C, Formation::CK}) {
    auto p = make_dfa(rng, 2, 3, 3, formation, Gate::Relu, 1, false, true);
    // keep relu away from its kink
    p.psi_dw_bias.values_mut().setConstant(0.7);
    if (p.psi_pw_bias.defined()) p.psi_pw_bias.values_mut().setConstant(0.7);
    auto x = Var<double>::param(rand_array(rng, 2, 6));
    std::vector<Var<double>> leaves = {x, p.kernel, p.bias, p.psi_dw, p.psi_dw_bias};
    if (p.psi_pw.defined()) {
      leaves.push_back(p.psi_pw);
      leaves.push_back(p.psi_pw_bias);
    }
    CHECK(check_gradients<double>([&] { return sum(square(dfa_conv(x, p))); }, leaves) <= tol);
  }

  auto pa = make_dfa(rng, 4, 4, 3, Formation::K, Gate::RestrictedTanh, 1, true, true);
  pa.psi_pw_bias.values_mut().setConstant(0.5);
  auto xa = Var<double>::param(rand_array(rng, 4, 6));
  std::vector<Var<double>> leaves = {xa, pa.kernel, pa.bias, pa.psi_dw, pa.psi_dw_bias,
                                     pa.psi_pw, pa.psi_pw_bias};
  CHECK(check_gradients<double>([&] { return sum(square(dfa_att(xa, pa))); }, leaves) <= tol);
}
