#pragma once

#include <string>
#include <vector>

#include "dytad/detection.hpp"
#include "dytad/dfa.hpp"
#include "dytad/dyhead.hpp"
#include "dytad/encoder.hpp"
#include "dytad/gradcheck.hpp"
#include "dytad/rng.hpp"

namespace dytad {

// Finite-difference coverage of every differentiable building block, at toy
// sizes. Shared between the `gradcheck` CLI command and the acceptance
// suite. All fixtures are seeded and initialized away from activation kinks
// (biases +1, small weights) so central differences are trustworthy.
struct GradSuiteResult {
  std::vector<GradCheckReport> reports;

  double worst() const {
    double w = 0.0;
    for (const auto& r : reports) w = std::max(w, r.max_rel_err);
    return w;
  }
  bool all_pass() const {
    for (const auto& r : reports)
      if (!r.pass) return false;
    return true;
  }
};

namespace gradsuite_detail {

using V = Var<double>;

inline DfaParams<double> rand_dfa(Rng& rng, int c_in, int c_out, int k, Formation formation,
                                  Gate gate, int window, bool depthwise) {
  DfaParams<double> p;
  p.c_in = c_in;
  p.c_out = c_out;
  p.k = k;
  p.formation = formation;
  p.gate = gate;
  p.window = window;
  p.depthwise = depthwise;
  p.kernel = depthwise ? V::param(rng.normal_array(c_in, k, 0.5))
                       : V::param(rng.normal_array(c_out, k * c_in, 0.5));
  p.bias = V::param(rng.normal_array(c_out, 1, 0.1));
  p.psi_dw = V::param(rng.normal_array(c_in, p.psi_kernel, 0.3));
  const int c_m = p.mask_rows();
  if (c_m != c_in) {
    p.psi_dw_bias = V::param(Array64::Zero(c_in, 1));
    p.psi_pw = V::param(rng.normal_array(c_m, c_in, 0.3));
    p.psi_pw_bias = V::param(Array64::Ones(c_m, 1));
  } else {
    p.psi_dw_bias = V::param(Array64::Ones(c_in, 1));
  }
  return p;
}

inline void collect(const DfaParams<double>& p, std::vector<V>& leaves) {
  leaves.push_back(p.kernel);
  if (p.bias.defined()) leaves.push_back(p.bias);
  leaves.push_back(p.psi_dw);
  leaves.push_back(p.psi_dw_bias);
  if (p.psi_pw.defined()) {
    leaves.push_back(p.psi_pw);
    leaves.push_back(p.psi_pw_bias);
  }
}

inline LnParams<double> rand_ln(Rng& rng, int c) {
  return {V::param(rng.normal_array(c, 1, 0.2) + 1.0), V::param(rng.normal_array(c, 1, 0.2))};
}

inline void collect(const LnParams<double>& p, std::vector<V>& leaves) {
  leaves.push_back(p.gain);
  leaves.push_back(p.offset);
}

inline DyHeadDepthParams<double> rand_round(Rng& rng, int c, int k) {
  DyHeadDepthParams<double> d;
  d.down_path = rand_dfa(rng, c, c, k, Formation::K, Gate::RestrictedTanh, 1, true);
  d.up_path = rand_dfa(rng, c, c, k, Formation::K, Gate::RestrictedTanh, 1, true);
  d.depth_path = rand_dfa(rng, c, c, k, Formation::K, Gate::RestrictedTanh, 1, true);
  d.ln_down = rand_ln(rng, c);
  d.ln_up = rand_ln(rng, c);
  d.gamma = V::param(Array64::Ones(1, 1));
  d.alpha = V::param(Array64::Ones(1, 1));
  return d;
}

inline void collect(const DyHeadDepthParams<double>& p, std::vector<V>& leaves) {
  collect(p.down_path, leaves);
  collect(p.up_path, leaves);
  collect(p.depth_path, leaves);
  collect(p.ln_down, leaves);
  collect(p.ln_up, leaves);
  leaves.push_back(p.gamma);
  leaves.push_back(p.alpha);
}

inline GradCheckReport run_one(const std::string& name, const std::function<V()>& build,
                               const std::vector<V>& leaves, double tol) {
  GradCheckReport r;
  r.name = name;
  r.max_rel_err = check_gradients<double>(build, leaves);
  r.pass = r.max_rel_err <= tol;
  return r;
}

}  // namespace gradsuite_detail

inline GradSuiteResult run_grad_suite(uint64_t seed = 42, double tol = 1e-4) {
  using namespace gradsuite_detail;
  GradSuiteResult out;
  Rng rng(seed);

  {  // dense aggregation, the most general formation
    auto p = rand_dfa(rng, 3, 2, 3, Formation::CK, Gate::RestrictedTanh, 1, false);
    V x = V::param(rng.normal_array(3, 6));
    std::vector<V> leaves{x};
    collect(p, leaves);
    out.reports.push_back(run_one("dfa_conv", [&] { return sum(square(dfa_conv(x, p))); }, leaves, tol));
  }
  {
    auto p = rand_dfa(rng, 4, 4, 3, Formation::K, Gate::RestrictedTanh, 1, true);
    V x = V::param(rng.normal_array(4, 6));
    std::vector<V> leaves{x};
    collect(p, leaves);
    out.reports.push_back(run_one("dfa_att", [&] { return sum(square(dfa_att(x, p))); }, leaves, tol));
  }
  {
    DynELayerParams<double> p;
    p.downsample = true;
    p.ln = rand_ln(rng, 3);
    p.window_branch = rand_dfa(rng, 3, 3, 3, Formation::K, Gate::RestrictedTanh, 2, true);
    p.instance.psi_w = V::param(rng.normal_array(1, 3, 0.3));
    p.instance.psi_b = V::param(Array64::Ones(1, 1));
    p.instance.kernel = V::param(rng.normal_array(3, 1, 0.5));
    p.instance.bias = V::param(rng.normal_array(3, 1, 0.1));
    p.instance.gate = Gate::RestrictedTanh;
    V x = V::param(rng.normal_array(3, 8));
    std::vector<V> leaves{x, p.ln.gain, p.ln.offset, p.instance.psi_w, p.instance.psi_b,
                          p.instance.kernel, p.instance.bias};
    collect(p.window_branch, leaves);
    out.reports.push_back(
        run_one("dyne_layer", [&] { return sum(square(dyne_layer(x, p))); }, leaves, tol));
  }
  {
    auto round = rand_round(rng, 3, 3);
    V lo = V::param(rng.normal_array(3, 8));
    V mid = V::param(rng.normal_array(3, 4));
    V hi = V::param(rng.normal_array(3, 2));
    std::vector<V> leaves{lo, mid, hi};
    collect(round, leaves);
    auto build = [&] {
      FeatureMap<double> l{lo, 1, 0}, m{mid, 2, 1}, h{hi, 4, 2};
      return sum(square(fuse_level(&l, m, &h, round).data));
    };
    out.reports.push_back(run_one("fuse_level", build, leaves, tol));
  }
  {
    auto round = rand_round(rng, 3, 3);
    V x = V::param(rng.normal_array(3, 6));
    std::vector<V> leaves{x};
    collect(round.depth_path, leaves);
    auto build = [&] {
      FeatureMap<double> f{x, 2, 0};
      return sum(square(depth_step(f, round).data));
    };
    out.reports.push_back(run_one("depth_step", build, leaves, tol));
  }
  HeadConvParams<double> cls_head{V::param(rng.normal_array(2, 9, 0.4)),
                                  V::param(rng.normal_array(2, 1, 0.1))};
  HeadConvParams<double> reg_head{V::param(rng.normal_array(2, 9, 0.4)),
                                  V::param(Array64::Ones(2, 1))};
  {
    V x = V::param(rng.normal_array(3, 6));
    std::vector<V> leaves{x, cls_head.w, cls_head.b};
    out.reports.push_back(
        run_one("classify", [&] { return sum(square(classify(x, cls_head))); }, leaves, tol));
  }
  {
    V x = V::param(rng.normal_array(3, 6));
    std::vector<V> leaves{x, reg_head.w, reg_head.b};
    out.reports.push_back(
        run_one("regress", [&] { return sum(square(regress(x, reg_head))); }, leaves, tol));
  }
  {
    Array64 p0 = Array64::Zero(2, 5);
    for (Eigen::Index i = 0; i < p0.size(); ++i) p0(i) = rng.uniform(0.05, 0.95);
    Array64 t0 = Array64::Zero(2, 5);
    t0(0, 1) = 1.0;
    t0(1, 3) = 1.0;
    V probs = V::param(p0);
    V targets = V::constant(t0);
    out.reports.push_back(run_one(
        "focal_loss", [&] { return sum(focal_loss(probs, targets)); }, {probs}, tol));
  }
  {
    Array64 pr(2, 4), tg(2, 4);
    for (Eigen::Index i = 0; i < pr.size(); ++i) pr(i) = rng.uniform(0.5, 3.0);
    for (Eigen::Index i = 0; i < tg.size(); ++i) tg(i) = rng.uniform(0.5, 3.0);
    V pred = V::param(pr);
    V target = V::constant(tg);
    out.reports.push_back(
        run_one("diou_loss", [&] { return sum(diou_loss(pred, target)); }, {pred}, tol));
  }
  {
    // two-level toy assignment with hand-placed positives
    TargetAssignment assign;
    LevelTargets l0;
    l0.cls = Array64::Zero(2, 6);
    l0.cls(0, 2) = 1.0;
    l0.reg = Array64::Zero(2, 6);
    l0.reg.col(2) << 1.5, 2.0;
    l0.center.assign(6, 0);
    l0.center[2] = 1;
    LevelTargets l1;
    l1.cls = Array64::Zero(2, 3);
    l1.cls(1, 1) = 1.0;
    l1.reg = Array64::Zero(2, 3);
    l1.reg.col(1) << 2.5, 1.0;
    l1.center.assign(3, 0);
    l1.center[1] = 1;
    assign.levels = {l0, l1};
    assign.t_pos = 2;

    V f0 = V::param(rng.normal_array(3, 6));
    V f1 = V::param(rng.normal_array(3, 3));
    std::vector<V> leaves{f0, f1, cls_head.w, cls_head.b, reg_head.w, reg_head.b};
    auto build = [&] {
      std::vector<V> cls{classify(f0, cls_head), classify(f1, cls_head)};
      std::vector<V> reg{regress(f0, reg_head), regress(f1, reg_head)};
      return total_loss(cls, reg, assign).total;
    };
    out.reports.push_back(run_one("total_loss", build, leaves, tol));
  }
  return out;
}

}  // namespace dytad
