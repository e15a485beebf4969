#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dytad/gradcheck.hpp"
#include "dytad/ops.hpp"
#include "oracles.hpp"

using namespace dytad;
using oracles::mat;
using oracles::max_abs_diff;
using oracles::rand_array;

TEST_CASE("pointwise_conv fixed values") {
  auto x = Var<double>::constant(mat(2, 2, {1, 2, 3, 4}));
  auto w = Var<double>::constant(mat(1, 2, {1, 1}));
  CHECK(max_abs_diff(pointwise_conv(x, w).value(), mat(1, 2, {4, 6})) == 0.0);

  auto id = Var<double>::constant(Array64::Zero(2, 2));
  id.values_mut()(0, 0) = 1.0;
  id.values_mut()(1, 1) = 1.0;
  CHECK(max_abs_diff(pointwise_conv(x, id).value(), x.value()) == 0.0);

  std::mt19937_64 rng(1);
  auto w0 = Var<double>::constant(Array64::Zero(1, 2));
  auto b = Var<double>::constant(mat(1, 1, {5}));
  auto x3 = Var<double>::constant(rand_array(rng, 2, 3));
  CHECK(max_abs_diff(pointwise_conv(x3, w0, b).value(), Array64::Constant(1, 3, 5.0)) == 0.0);
}

TEST_CASE("pointwise_conv linearity to 1e-12") {
  std::mt19937_64 rng(2);
  auto w = Var<double>::constant(rand_array(rng, 3, 4));
  Array64 x = rand_array(rng, 4, 6), y = rand_array(rng, 4, 6);
  const double a = 0.37, b = -1.91;
  Array64 lhs = pointwise_conv(Var<double>::constant(a * x + b * y), w).value();
  Array64 rhs = a * pointwise_conv(Var<double>::constant(x), w).value() +
                b * pointwise_conv(Var<double>::constant(y), w).value();
  CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("depthwise_conv1d fixed values and errors") {
  auto x = Var<double>::constant(mat(1, 4, {1, 2, 3, 4}));
  auto w = Var<double>::constant(mat(1, 3, {1, 1, 1}));
  CHECK(max_abs_diff(depthwise_conv1d(x, w).value(), mat(1, 4, {3, 6, 9, 7})) == 0.0);

  auto w1 = Var<double>::constant(mat(1, 1, {1}));
  CHECK(max_abs_diff(depthwise_conv1d(x, w1).value(), x.value()) == 0.0);

  auto z = Var<double>::constant(Array64::Zero(2, 5));
  auto wz = Var<double>::constant(mat(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(depthwise_conv1d(z, wz).value().abs().maxCoeff() == 0.0);

  auto weven = Var<double>::constant(Array64::Ones(1, 2));
  CHECK_THROWS_AS(depthwise_conv1d(x, weven), std::invalid_argument);
}

TEST_CASE("max_pool_ds2 fixed values") {
  auto x = Var<double>::constant(mat(1, 4, {1, 3, 2, 0}));
  CHECK(max_abs_diff(max_pool_ds2(x).value(), mat(1, 2, {3, 2})) == 0.0);

  auto c = Var<double>::constant(Array64::Constant(2, 6, 7.5));
  CHECK(max_abs_diff(max_pool_ds2(c).value(), Array64::Constant(2, 3, 7.5)) == 0.0);

  auto one = Var<double>::constant(mat(1, 1, {4}));
  CHECK(max_abs_diff(max_pool_ds2(one).value(), mat(1, 1, {4})) == 0.0);

  auto odd = Var<double>::constant(mat(1, 5, {1, 3, 2, 0, 9}));
  CHECK(max_abs_diff(max_pool_ds2(odd).value(), mat(1, 3, {3, 2, 9})) == 0.0);
}

TEST_CASE("linear_upsample_x2 fixed values and errors") {
  auto x = Var<double>::constant(mat(1, 2, {0, 2}));
  // even target: half-pixel-centered sampling, edges replicate
  CHECK(max_abs_diff(linear_upsample_x2(x, 4).value(), mat(1, 4, {0, 0.5, 1.5, 2})) <= 1e-15);
  // odd target 2T-1: endpoints align, midpoints average
  CHECK(max_abs_diff(linear_upsample_x2(x, 3).value(), mat(1, 3, {0, 1, 2})) <= 1e-15);

  auto c = Var<double>::constant(Array64::Constant(3, 5, -2.25));
  CHECK(max_abs_diff(linear_upsample_x2(c, 10).value(), Array64::Constant(3, 10, -2.25)) == 0.0);
  CHECK(max_abs_diff(linear_upsample_x2(c, 9).value(), Array64::Constant(3, 9, -2.25)) == 0.0);

  auto one = Var<double>::constant(mat(1, 1, {3}));
  CHECK(max_abs_diff(linear_upsample_x2(one, 2).value(), mat(1, 2, {3, 3})) == 0.0);

  CHECK_THROWS_AS(linear_upsample_x2(x, 5), std::invalid_argument);
  CHECK_THROWS_AS(linear_upsample_x2(x, 2), std::invalid_argument);
}

TEST_CASE("pool then upsample reproduces constants exactly") {
  for (Eigen::Index tlen : {2, 5, 8, 13}) {
    auto c = Var<double>::constant(Array64::Constant(2, tlen, 3.125));
    auto down = max_pool_ds2(c);
    auto up = linear_upsample_x2(down, tlen);
    CHECK(max_abs_diff(up.value(), c.value()) == 0.0);
  }
}

TEST_CASE("layer_norm fixed values") {
  auto gain = Var<double>::constant(Array64::Ones(2, 1));
  auto offset = Var<double>::constant(Array64::Zero(2, 1));
  auto x = Var<double>::constant(mat(2, 1, {1, 3}));
  Array64 y = layer_norm(x, gain, offset).value();
  CHECK(std::abs(y(0, 0) + 1.0) <= 1e-4);
  CHECK(std::abs(y(1, 0) - 1.0) <= 1e-4);

  // identical channels: epsilon keeps the output at 0 before affine
  auto flat = Var<double>::constant(Array64::Constant(3, 4, 2.0));
  auto g3 = Var<double>::constant(Array64::Ones(3, 1));
  auto o3 = Var<double>::constant(Array64::Zero(3, 1));
  CHECK(layer_norm(flat, g3, o3).value().abs().maxCoeff() == 0.0);

  // affine only: gain 2, offset 1 on an already-normalized column
  auto g2 = Var<double>::constant(Array64::Constant(2, 1, 2.0));
  auto o2 = Var<double>::constant(Array64::Constant(2, 1, 1.0));
  Array64 z = layer_norm(x, g2, o2).value();
  CHECK(std::abs(z(0, 0) - (2.0 * y(0, 0) + 1.0)) <= 1e-12);
  CHECK(std::abs(z(1, 0) - (2.0 * y(1, 0) + 1.0)) <= 1e-12);
}

TEST_CASE("layer_norm statistics property") {
  std::mt19937_64 rng(3);
  auto x = Var<double>::constant(rand_array(rng, 4, 7, -3.0, 3.0));
  auto gain = Var<double>::constant(Array64::Ones(4, 1));
  auto offset = Var<double>::constant(Array64::Zero(4, 1));
  Array64 y = layer_norm(x, gain, offset).value();
  for (Eigen::Index t = 0; t < y.cols(); ++t) {
    double m = y.col(t).mean();
    double v = (y.col(t) - m).square().mean();
    CHECK(std::abs(m) <= 1e-6);
    CHECK(std::abs(v - 1.0) <= 1e-4);
  }
}

TEST_CASE("group_norm grouping and errors") {
  std::mt19937_64 rng(4);
  auto x = Var<double>::constant(rand_array(rng, 4, 5, -2.0, 2.0));
  auto gain = Var<double>::constant(Array64::Ones(4, 1));
  auto offset = Var<double>::constant(Array64::Zero(4, 1));
  CHECK_THROWS_AS(group_norm(x, 3, gain, offset), std::invalid_argument);

  // groups == C with T == 1 degenerates to zero output (per-channel stats)
  auto col = Var<double>::constant(mat(2, 1, {5, -1}));
  auto g2 = Var<double>::constant(Array64::Ones(2, 1));
  auto o2 = Var<double>::constant(Array64::Zero(2, 1));
  CHECK(group_norm(col, 2, g2, o2).value().abs().maxCoeff() == 0.0);

  // one group: stats over the whole matrix
  Array64 y = group_norm(x, 1, gain, offset).value();
  double m = y.mean();
  double v = (y - m).square().mean();
  CHECK(std::abs(m) <= 1e-6);
  CHECK(std::abs(v - 1.0) <= 1e-4);
}

TEST_CASE("activations") {
  auto x = Var<double>::constant(mat(1, 4, {-1, 2, 0, -5}));
  CHECK(max_abs_diff(relu(x).value(), mat(1, 4, {0, 2, 0, 0})) == 0.0);
  CHECK(sigmoid(Var<double>::constant(mat(1, 1, {0}))).value()(0, 0) == 0.5);

  Array64 rt = restricted_tanh(x).value();
  CHECK(rt(0, 0) == 0.0);
  CHECK(rt(0, 3) == 0.0);
  CHECK(rt(0, 1) == doctest::Approx(std::tanh(2.0)).epsilon(1e-12));
  for (double v : {-3.0, -0.5, 0.0, 0.7, 10.0}) {
    double r = restricted_tanh(Var<double>::constant(mat(1, 1, {v}))).value()(0, 0);
    CHECK(r >= 0.0);
    CHECK(r < 1.0);
  }

  auto s = softmax_over_channels(Var<double>::constant(Array64::Constant(4, 3, 2.5)));
  CHECK(max_abs_diff(s.value(), Array64::Constant(4, 3, 0.25)) <= 1e-15);
  std::mt19937_64 rng(5);
  Array64 cols = softmax_over_channels(Var<double>::constant(rand_array(rng, 5, 4))).value();
  for (Eigen::Index t = 0; t < 4; ++t) CHECK(cols.col(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backward basics") {
  std::mt19937_64 rng(6);
  auto x = Var<double>::param(rand_array(rng, 3, 4));

  auto loss = sum(x);
  backward(loss);
  CHECK(max_abs_diff(x.grad(), Array64::Ones(3, 4)) == 0.0);

  x.clear_grad();
  auto loss2 = mul(sum(square(x)), Var<double>::scalar(0.5));
  backward(loss2);
  CHECK(max_abs_diff(x.grad(), x.value()) <= 1e-12);

  // repeated backward accumulates
  backward(loss2);
  CHECK(max_abs_diff(x.grad(), 2.0 * x.value()) <= 1e-12);

  CHECK_THROWS_AS(backward(x), std::invalid_argument);
}

TEST_CASE("gradient checks for every differentiable op") {
  std::mt19937_64 rng(7);
  const double tol = 1e-4;

  auto check1 = [&](const char* name, auto fn, Array64 init) {
    auto x = Var<double>::param(std::move(init));
    double err = check_gradients<double>([&] { return sum(fn(x)); }, {x});
    INFO(name);
    CHECK(err <= tol);
  };

  check1("relu", [](auto& v) { return relu(v); }, rand_array(rng, 3, 5) + 0.3);
  check1("sigmoid", [](auto& v) { return sigmoid(v); }, rand_array(rng, 3, 5));
  check1("restricted_tanh", [](auto& v) { return restricted_tanh(v); }, rand_array(rng, 3, 5) + 0.4);
  check1("exp", [](auto& v) { return dytad::exp(v); }, rand_array(rng, 3, 5));
  check1("log", [](auto& v) { return dytad::log(v); }, rand_array(rng, 3, 5, 0.5, 2.0));
  check1("sqrt", [](auto& v) { return dytad::sqrt(v); }, rand_array(rng, 3, 5, 0.5, 2.0));
  check1("square", [](auto& v) { return square(v); }, rand_array(rng, 3, 5));
  check1("pow", [](auto& v) { return pow_scalar(v, 2.0); }, rand_array(rng, 3, 5, 0.5, 2.0));
  check1("clamp_min", [](auto& v) { return clamp_min(v, 0.1); }, rand_array(rng, 3, 5) * 2.0);
  check1("mean", [](auto& v) { return mean(v); }, rand_array(rng, 3, 5));
  check1("sum_over_channels", [](auto& v) { return square(sum_over_channels(v)); }, rand_array(rng, 3, 5));
  check1("mean_over_channels", [](auto& v) { return square(mean_over_channels(v)); }, rand_array(rng, 3, 5));
  check1("sum_over_time", [](auto& v) { return square(sum_over_time(v)); }, rand_array(rng, 3, 5));
  check1("softmax", [](auto& v) { return square(softmax_over_channels(v)); }, rand_array(rng, 4, 3));
  check1("slice_rows", [](auto& v) { return square(slice_rows(v, 1, 2)); }, rand_array(rng, 4, 5));
  check1("slice_cols", [](auto& v) { return square(slice_cols(v, 1, 3)); }, rand_array(rng, 4, 5));
  check1("tile_rows", [](auto& v) { return square(tile_rows(v, 3)); }, rand_array(rng, 2, 5));
  check1("select_cols", [](auto& v) { return square(select_cols(v, {0, 2, 2, 4})); }, rand_array(rng, 3, 5));
  check1("temporal_shift+", [](auto& v) { return square(temporal_shift(v, 2)); }, rand_array(rng, 3, 6));
  check1("temporal_shift-", [](auto& v) { return square(temporal_shift(v, -1)); }, rand_array(rng, 3, 6));
  check1("max_pool_ds2", [](auto& v) { return square(max_pool_ds2(v)); }, rand_array(rng, 3, 7));
  check1("upsample_even", [](auto& v) { return square(linear_upsample_x2(v, 10)); }, rand_array(rng, 2, 5));
  check1("upsample_odd", [](auto& v) { return square(linear_upsample_x2(v, 9)); }, rand_array(rng, 2, 5));

  // binary ops with broadcasting, all leaves checked
  auto a = Var<double>::param(rand_array(rng, 3, 4));
  auto brow = Var<double>::param(rand_array(rng, 1, 4));
  auto bcol = Var<double>::param(rand_array(rng, 3, 1, 0.5, 1.5));
  CHECK(check_gradients<double>([&] { return sum(square(add(a, brow))); }, {a, brow}) <= tol);
  CHECK(check_gradients<double>([&] { return sum(square(sub(a, bcol))); }, {a, bcol}) <= tol);
  CHECK(check_gradients<double>([&] { return sum(square(mul(a, brow))); }, {a, brow}) <= tol);
  CHECK(check_gradients<double>([&] { return sum(square(div(a, bcol))); }, {a, bcol}) <= tol);

  auto cat_a = Var<double>::param(rand_array(rng, 2, 4));
  auto cat_b = Var<double>::param(rand_array(rng, 3, 4));
  CHECK(check_gradients<double>(
            [&] { return sum(square(concat_rows<double>({cat_a, cat_b}))); }, {cat_a, cat_b}) <= tol);

  auto mm_a = Var<double>::param(rand_array(rng, 3, 4));
  auto mm_b = Var<double>::param(rand_array(rng, 4, 5));
  CHECK(check_gradients<double>([&] { return sum(square(matmul(mm_a, mm_b))); }, {mm_a, mm_b}) <= tol);

  auto pw_x = Var<double>::param(rand_array(rng, 3, 6));
  auto pw_w = Var<double>::param(rand_array(rng, 2, 3));
  auto pw_b = Var<double>::param(rand_array(rng, 2, 1));
  CHECK(check_gradients<double>(
            [&] { return sum(square(pointwise_conv(pw_x, pw_w, pw_b))); }, {pw_x, pw_w, pw_b}) <= tol);

  auto dw_x = Var<double>::param(rand_array(rng, 3, 8));
  auto dw_w = Var<double>::param(rand_array(rng, 3, 5));
  CHECK(check_gradients<double>(
            [&] { return sum(square(depthwise_conv1d(dw_x, dw_w))); }, {dw_x, dw_w}) <= tol);

  auto ln_x = Var<double>::param(rand_array(rng, 4, 5, -2.0, 2.0));
  auto ln_g = Var<double>::param(rand_array(rng, 4, 1, 0.5, 1.5));
  auto ln_o = Var<double>::param(rand_array(rng, 4, 1));
  CHECK(check_gradients<double>(
            [&] { return sum(square(layer_norm(ln_x, ln_g, ln_o))); }, {ln_x, ln_g, ln_o}) <= tol);

  auto gn_x = Var<double>::param(rand_array(rng, 4, 5, -2.0, 2.0));
  CHECK(check_gradients<double>(
            [&] { return sum(square(group_norm(gn_x, 2, ln_g, ln_o))); }, {gn_x, ln_g, ln_o}) <= tol);
}

TEST_CASE("graph reuse and constant leaves record nothing") {
  auto c = Var<double>::constant(Array64::Ones(2, 2));
  auto y = mul(c, c);
  CHECK(y.node()->parents.empty());  // no grad needed anywhere

  auto p = Var<double>::param(Array64::Ones(2, 2));
  auto z = mul(p, c);
  CHECK(z.node()->parents.size() == 2);
}
