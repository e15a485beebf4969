#include "dytad/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dytad/evaluation.hpp"

namespace dytad {

void regression_ranges(const std::vector<LevelMeta>& levels, std::vector<double>& lo,
                       std::vector<double>& hi) {
  const size_t n = levels.size();
  lo.assign(n, 0.0);
  hi.assign(n, std::numeric_limits<double>::infinity());
  for (size_t l = 0; l < n; ++l) {
    if (l > 0) lo[l] = static_cast<double>(levels[l].stride);
    if (l + 1 < n) hi[l] = 2.0 * static_cast<double>(levels[l].stride);
  }
}

TargetAssignment assign_targets(const std::vector<Segment>& gt,
                                const std::vector<LevelMeta>& levels, int num_classes,
                                double center_radius) {
  DYTAD_REQUIRE(num_classes >= 1, "assign_targets: need at least one class");
  for (const auto& s : gt) {
    DYTAD_REQUIRE(s.t_start < s.t_end, "assign_targets: empty ground-truth segment");
    DYTAD_REQUIRE(s.label >= 0 && s.label < num_classes, "assign_targets: label out of range");
  }
  std::vector<double> lo, hi;
  regression_ranges(levels, lo, hi);

  TargetAssignment out;
  for (size_t l = 0; l < levels.size(); ++l) {
    const int tlen = levels[l].length;
    const double stride = levels[l].stride;
    LevelTargets lt;
    lt.cls = Array64::Zero(num_classes, tlen);
    lt.reg = Array64::Zero(2, tlen);
    lt.center.assign(static_cast<size_t>(tlen), 0);

    for (int t = 0; t < tlen; ++t) {
      const double p = t * stride;
      int chosen = -1;
      double chosen_len = std::numeric_limits<double>::infinity();
      for (size_t m = 0; m < gt.size(); ++m) {
        const Segment& s = gt[m];
        if (p < s.t_start || p > s.t_end) continue;
        const double center = 0.5 * (s.t_start + s.t_end);
        if (std::abs(p - center) > center_radius * stride) continue;
        const double far = std::max(p - s.t_start, s.t_end - p);
        if (far < lo[l] || far >= hi[l]) continue;
        lt.cls(s.label, t) = 1.0;
        const double len = s.t_end - s.t_start;
        if (len < chosen_len) {
          chosen_len = len;
          chosen = static_cast<int>(m);
        }
      }
      if (chosen >= 0) {
        const Segment& s = gt[static_cast<size_t>(chosen)];
        lt.reg(0, t) = (p - s.t_start) / stride;
        lt.reg(1, t) = (s.t_end - p) / stride;
        lt.center[static_cast<size_t>(t)] = 1;
        ++out.t_pos;
      }
    }
    out.levels.push_back(std::move(lt));
  }
  return out;
}

bool decode(int t, double d_start, double d_end, int stride, double feature_stride_s,
            double duration_s, double& start_s, double& end_s) {
  const double unit = stride * feature_stride_s;
  start_s = std::clamp((t - d_start) * unit, 0.0, duration_s);
  end_s = std::clamp((t + d_end) * unit, 0.0, duration_s);
  return start_s < end_s;
}

std::vector<Detection> soft_nms(std::vector<Detection> dets, const PostprocessConfig& cfg) {
  std::vector<Detection> kept;
  while (!dets.empty() && static_cast<int>(kept.size()) < cfg.max_detections) {
    size_t best = 0;
    for (size_t i = 1; i < dets.size(); ++i)
      if (dets[i].score > dets[best].score) best = i;
    Detection top = dets[best];
    dets.erase(dets.begin() + static_cast<std::ptrdiff_t>(best));
    kept.push_back(top);

    Segment ts{top.t_start, top.t_end, top.label};
    std::vector<Detection> remaining;
    remaining.reserve(dets.size());
    for (auto& d : dets) {
      if (d.label == top.label) {
        const double ov = tiou(ts, Segment{d.t_start, d.t_end, d.label});
        d.score *= std::exp(-(ov * ov) / cfg.soft_nms_sigma);
      }
      if (d.score >= cfg.soft_nms_min_score) remaining.push_back(std::move(d));
    }
    dets = std::move(remaining);
  }
  return kept;
}

namespace {

bool score_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  if (a.t_end != b.t_end) return a.t_end < b.t_end;
  return a.label < b.label;
}

}  // namespace

std::vector<Detection> postprocess(const std::string& video_id,
                                   const std::vector<Array64>& cls_probs,
                                   const std::vector<Array64>& reg_out,
                                   const std::vector<LevelMeta>& levels, double feature_stride_s,
                                   double duration_s, const PostprocessConfig& cfg) {
  DYTAD_REQUIRE(cls_probs.size() == levels.size() && reg_out.size() == levels.size(),
                "postprocess: level count mismatch");
  std::vector<Detection> candidates;
  for (size_t l = 0; l < levels.size(); ++l) {
    const Array64& probs = cls_probs[l];
    const Array64& reg = reg_out[l];
    DYTAD_REQUIRE(probs.cols() == levels[l].length && reg.cols() == levels[l].length,
                  "postprocess: level length mismatch");
    for (int t = 0; t < levels[l].length; ++t) {
      for (Eigen::Index c = 0; c < probs.rows(); ++c) {
        const double score = probs(c, t);
        if (score <= cfg.score_threshold) continue;
        double s = 0.0, e = 0.0;
        if (!decode(t, reg(0, t), reg(1, t), levels[l].stride, feature_stride_s, duration_s, s, e))
          continue;
        candidates.push_back({video_id, s, e, static_cast<int>(c), score});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), score_order);
  if (static_cast<int>(candidates.size()) > cfg.pre_nms_topk)
    candidates.resize(static_cast<size_t>(cfg.pre_nms_topk));
  std::vector<Detection> out = soft_nms(std::move(candidates), cfg);
  std::sort(out.begin(), out.end(), score_order);
  return out;
}

}  // namespace dytad
