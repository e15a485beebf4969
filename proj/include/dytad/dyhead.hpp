#pragma once

#include <string>
#include <vector>

#include "dytad/dfa.hpp"
#include "dytad/encoder.hpp"
#include "dytad/ops.hpp"

namespace dytad {

// Normalized attention recorded during a head forward pass (diagnostics).
template <typename S>
struct AttTrace {
  int depth = 0;
  int level = 0;
  std::string path;  // "down", "up" or "depth"
  Array<S> attention;  // k x T of the consuming DFA_Att
};

template <typename S>
using AttSink = std::vector<AttTrace<S>>;

// One depth round of the head. Shared across levels; the two scalars gate
// the neighbor-fusion path (gamma) and the identity path (alpha).
template <typename S>
struct DyHeadDepthParams {
  DfaParams<S> down_path, up_path, depth_path;  // all depthwise DFA_Att
  LnParams<S> ln_down, ln_up;
  Var<S> gamma, alpha;  // 1x1 scalars
};

template <typename S>
struct DyHeadParams {
  std::vector<DyHeadDepthParams<S>> rounds;  // length D
};

// Cross-scale fusion: neighbors are attention-refined, resampled onto f's
// grid, and gated in; a missing neighbor contributes zero.
template <typename S>
FeatureMap<S> fuse_level(const FeatureMap<S>* lower, const FeatureMap<S>& f,
                         const FeatureMap<S>* upper, const DyHeadDepthParams<S>& p,
                         AttSink<S>* sink = nullptr, int depth_idx = 0) {
  Var<S> acc = mul(f.data, p.alpha);
  Var<S> nb;
  if (lower) {
    DYTAD_REQUIRE(lower->stride * 2 == f.stride, "fuse_level: lower level must have half stride");
    Array<S> att;
    Var<S> refined = dfa_att(apply_ln(lower->data, p.ln_down), p.down_path, sink ? &att : nullptr);
    if (sink) sink->push_back({depth_idx, f.level, "down", std::move(att)});
    Var<S> ds = max_pool_ds2(refined);
    DYTAD_REQUIRE(ds.cols() == f.data.cols(), "fuse_level: lower length mismatch");
    nb = ds;
  }
  if (upper) {
    DYTAD_REQUIRE(upper->stride == f.stride * 2, "fuse_level: upper level must have double stride");
    Array<S> att;
    Var<S> refined = dfa_att(apply_ln(upper->data, p.ln_up), p.up_path, sink ? &att : nullptr);
    if (sink) sink->push_back({depth_idx, f.level, "up", std::move(att)});
    nb = nb.defined() ? add(nb, linear_upsample_x2(refined, f.data.cols()))
                      : linear_upsample_x2(refined, f.data.cols());
  }
  if (nb.defined()) acc = add(acc, mul(nb, p.gamma));
  return {acc, f.stride, f.level};
}

template <typename S>
FeatureMap<S> depth_step(const FeatureMap<S>& f, const DyHeadDepthParams<S>& p,
                         AttSink<S>* sink = nullptr, int depth_idx = 0) {
  Array<S> att;
  Var<S> y = dfa_att(f.data, p.depth_path, sink ? &att : nullptr);
  if (sink) sink->push_back({depth_idx, f.level, "depth", std::move(att)});
  return {y, f.stride, f.level};
}

// D synchronous rounds: every level of round d reads only round d-1.
template <typename S>
FeaturePyramid<S> dyhead_forward(const FeaturePyramid<S>& pyramid, const DyHeadParams<S>& p,
                                 AttSink<S>* sink = nullptr) {
  FeaturePyramid<S> cur = pyramid;
  for (size_t d = 0; d < p.rounds.size(); ++d) {
    const auto& round = p.rounds[d];
    FeaturePyramid<S> next;
    next.reserve(cur.size());
    for (size_t l = 0; l < cur.size(); ++l) {
      const FeatureMap<S>* lo = l > 0 ? &cur[l - 1] : nullptr;
      const FeatureMap<S>* up = l + 1 < cur.size() ? &cur[l + 1] : nullptr;
      FeatureMap<S> fused = fuse_level(lo, cur[l], up, round, sink, static_cast<int>(d));
      next.push_back(depth_step(fused, round, sink, static_cast<int>(d)));
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace dytad
