#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dytad/encoder.hpp"
#include "dytad/ops.hpp"

namespace dytad {

// Closed interval on the time axis. Units are context-dependent: seconds in
// files and evaluation, input-grid units during target assignment.
struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  int label = 0;
};

struct Detection {
  std::string video_id;
  double t_start = 0.0;  // seconds
  double t_end = 0.0;
  int label = 0;
  double score = 0.0;
};

struct PostprocessConfig {
  double score_threshold = 0.001;
  int pre_nms_topk = 2000;
  double soft_nms_sigma = 0.5;
  double soft_nms_min_score = 0.001;
  int max_detections = 200;
};

struct LevelMeta {
  int length = 0;
  int stride = 1;
};

// Per-level training targets. Regression offsets are in units of the level
// stride and are meaningful only where center == 1.
struct LevelTargets {
  Array64 cls;                  // num_classes x T_level, multi-hot
  Array64 reg;                  // 2 x T_level, rows (d_start, d_end)
  std::vector<uint8_t> center;  // T_level
};

struct TargetAssignment {
  std::vector<LevelTargets> levels;
  int t_pos = 0;
};

// Regression range bucket of a level: a grid point may only match an
// instance whose larger offset (in input-grid units) falls in
// [stride, 2*stride), opened to 0 at the finest level and unbounded at the
// coarsest.
void regression_ranges(const std::vector<LevelMeta>& levels, std::vector<double>& lo,
                       std::vector<double>& hi);

// Center sampling: grid point (level, t) at input position p = t*stride is
// positive for instance m iff p lies inside the instance, within
// radius*stride of its center, and the instance's larger offset is in the
// level's range bucket. Among competing instances the shortest wins the
// regression target; class targets are multi-hot.
// gt segments are in input-grid units.
TargetAssignment assign_targets(const std::vector<Segment>& gt,
                                const std::vector<LevelMeta>& levels, int num_classes,
                                double center_radius);

// Grid offsets back to seconds, clamped to the video; degenerate results
// are rejected.
bool decode(int t, double d_start, double d_end, int stride, double feature_stride_s,
            double duration_s, double& start_s, double& end_s);

std::vector<Detection> soft_nms(std::vector<Detection> dets, const PostprocessConfig& cfg);

// threshold -> decode -> top-k -> soft-NMS -> score-sorted detections
std::vector<Detection> postprocess(const std::string& video_id,
                                   const std::vector<Array64>& cls_probs,
                                   const std::vector<Array64>& reg_out,
                                   const std::vector<LevelMeta>& levels, double feature_stride_s,
                                   double duration_s, const PostprocessConfig& cfg);

// ---- output heads ----

template <typename S>
struct HeadConvParams {
  Var<S> w;  // C_out x 3*C
  Var<S> b;  // C_out x 1
};

template <typename S>
Var<S> classify(const Var<S>& f, const HeadConvParams<S>& p) {
  return sigmoid(conv3(f, p.w, p.b));
}

template <typename S>
Var<S> regress(const Var<S>& f, const HeadConvParams<S>& p) {
  return relu(conv3(f, p.w, p.b));
}

// ---- losses ----

inline constexpr double kLossEps = 1e-8;

// Per-element focal loss against {0,1} targets; log arguments clamped.
template <typename S>
Var<S> focal_loss(const Var<S>& probs, const Var<S>& targets, S alpha = S(0.25), S gamma = S(2)) {
  Var<S> one = Var<S>::scalar(S(1));
  Var<S> q = sub(one, probs);
  Var<S> pos = mul(Var<S>::scalar(-alpha), mul(pow_scalar(q, gamma), log(clamp_min(probs, S(kLossEps)))));
  Var<S> neg = mul(Var<S>::scalar(-(S(1) - alpha)),
                   mul(pow_scalar(probs, gamma), log(clamp_min(q, S(kLossEps)))));
  return add(mul(targets, pos), mul(sub(one, targets), neg));
}

namespace detail {

template <typename S>
Var<S> min_elem(const Var<S>& a, const Var<S>& b) {
  return sub(a, relu(sub(a, b)));
}

template <typename S>
Var<S> max_elem(const Var<S>& a, const Var<S>& b) {
  return add(a, relu(sub(b, a)));
}

}  // namespace detail

// DIoU between offset pairs sharing an anchor: both rebuild segments
// [-d_start, +d_end]; loss = 1 - IoU + (center distance / enclosing length)^2.
// pred and target are 2 x P (rows d_start, d_end, all >= 0); returns 1 x P.
template <typename S>
Var<S> diou_loss(const Var<S>& pred, const Var<S>& target) {
  DYTAD_REQUIRE(pred.rows() == 2 && target.rows() == 2 && pred.cols() == target.cols(),
                "diou_loss: expects matching 2 x P offset arrays");
  Var<S> ds_p = slice_rows(pred, 0, 1), de_p = slice_rows(pred, 1, 1);
  Var<S> ds_t = slice_rows(target, 0, 1), de_t = slice_rows(target, 1, 1);
  Var<S> inter = add(detail::min_elem(ds_p, ds_t), detail::min_elem(de_p, de_t));
  Var<S> uni = sub(add(add(ds_p, de_p), add(ds_t, de_t)), inter);
  Var<S> iou = div(inter, clamp_min(uni, S(kLossEps)));
  Var<S> half = Var<S>::scalar(S(0.5));
  Var<S> delta = mul(sub(sub(de_p, ds_p), sub(de_t, ds_t)), half);
  Var<S> enclose = add(detail::max_elem(ds_p, ds_t), detail::max_elem(de_p, de_t));
  Var<S> penalty = div(square(delta), clamp_min(square(enclose), S(kLossEps)));
  return add(sub(Var<S>::scalar(S(1)), iou), penalty);
}

template <typename S>
struct TotalLoss {
  Var<S> total;       // scalar graph node
  S cls_sum = S(0);   // unnormalized per-term sums, for logging
  S reg_sum = S(0);
  int t_pos = 0;
};

// Detection objective: (sum of focal terms + lambda * sum of positive DIoU
// terms) / max(T_pos, 1).
template <typename S>
TotalLoss<S> total_loss(const std::vector<Var<S>>& cls_probs, const std::vector<Var<S>>& reg_out,
                        const TargetAssignment& assign, S lambda_reg = S(1)) {
  DYTAD_REQUIRE(cls_probs.size() == assign.levels.size() && reg_out.size() == assign.levels.size(),
                "total_loss: level count mismatch");
  Var<S> cls_total, reg_total;
  for (size_t l = 0; l < assign.levels.size(); ++l) {
    const auto& lt = assign.levels[l];
    Var<S> tgt = Var<S>::constant(lt.cls.template cast<S>());
    Var<S> lvl = sum(focal_loss(cls_probs[l], tgt));
    cls_total = cls_total.defined() ? add(cls_total, lvl) : lvl;

    std::vector<Eigen::Index> idx;
    for (size_t t = 0; t < lt.center.size(); ++t)
      if (lt.center[t]) idx.push_back(static_cast<Eigen::Index>(t));
    if (idx.empty()) continue;
    Array<S> reg_tgt(2, static_cast<Eigen::Index>(idx.size()));
    for (size_t j = 0; j < idx.size(); ++j)
      reg_tgt.col(static_cast<Eigen::Index>(j)) = lt.reg.col(idx[j]).template cast<S>();
    Var<S> lvl_reg = sum(diou_loss(select_cols(reg_out[l], idx), Var<S>::constant(reg_tgt)));
    reg_total = reg_total.defined() ? add(reg_total, lvl_reg) : lvl_reg;
  }

  TotalLoss<S> out;
  out.t_pos = assign.t_pos;
  out.cls_sum = cls_total.defined() ? cls_total.value()(0, 0) : S(0);
  out.reg_sum = reg_total.defined() ? reg_total.value()(0, 0) : S(0);
  Var<S> numer = cls_total;
  if (reg_total.defined()) numer = add(numer, mul(Var<S>::scalar(lambda_reg), reg_total));
  out.total = mul(numer, Var<S>::scalar(S(1) / S(std::max(assign.t_pos, 1))));
  return out;
}

}  // namespace dytad
