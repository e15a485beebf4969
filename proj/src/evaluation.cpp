#include "dytad/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace dytad {

double tiou(const Segment& a, const Segment& b) {
  const double inter = std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start);
  if (inter <= 0.0) return 0.0;
  const double uni = (a.t_end - a.t_start) + (b.t_end - b.t_start) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

// Deterministic detection order: score descending, then stable identity.
bool det_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.video_id != b.video_id) return a.video_id < b.video_id;
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  if (a.t_end != b.t_end) return a.t_end < b.t_end;
  return a.label < b.label;
}

// area under the precision envelope (all-point interpolation)
double interpolated_ap(std::vector<double> precision, std::vector<double> recall) {
  for (size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

}  // namespace

double average_precision(const std::vector<Detection>& dets, const GtMap& gts, int label,
                         double threshold) {
  // class GT per video
  std::map<std::string, std::vector<Segment>> gt;
  int num_gt = 0;
  for (const auto& [vid, segs] : gts)
    for (const auto& s : segs)
      if (s.label == label) {
        gt[vid].push_back(s);
        ++num_gt;
      }
  if (num_gt == 0) return 0.0;

  std::vector<Detection> cls_dets;
  for (const auto& d : dets)
    if (d.label == label) cls_dets.push_back(d);
  std::sort(cls_dets.begin(), cls_dets.end(), det_before);

  std::map<std::string, std::vector<bool>> used;
  std::vector<double> precision, recall;
  int tp = 0, seen = 0;
  for (const auto& d : cls_dets) {
    ++seen;
    bool matched = false;
    auto it = gt.find(d.video_id);
    if (it != gt.end()) {
      auto& candidates = it->second;
      auto& taken = used[d.video_id];
      taken.resize(candidates.size(), false);
      double best = threshold;
      int best_idx = -1;
      Segment ds{d.t_start, d.t_end, d.label};
      for (size_t g = 0; g < candidates.size(); ++g) {
        if (taken[g]) continue;
        const double ov = tiou(ds, candidates[g]);
        if (ov >= best && (best_idx < 0 || ov > best)) {
          best = ov;
          best_idx = static_cast<int>(g);
        }
      }
      if (best_idx >= 0) {
        taken[static_cast<size_t>(best_idx)] = true;
        matched = true;
      }
    }
    tp += matched ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / seen);
    recall.push_back(static_cast<double>(tp) / num_gt);
  }
  if (precision.empty()) return 0.0;
  return interpolated_ap(std::move(precision), std::move(recall));
}

std::vector<double> default_tiou_grid() { return {0.3, 0.4, 0.5, 0.6, 0.7}; }

EvalReport map_report(const std::vector<Detection>& dets, const GtMap& gts,
                      const std::vector<double>& thresholds) {
  DYTAD_REQUIRE(!thresholds.empty(), "map_report: empty threshold grid");
  EvalReport report;
  report.thresholds = thresholds;
  report.num_detections = static_cast<int>(dets.size());

  std::set<int> labels;
  for (const auto& [vid, segs] : gts)
    for (const auto& s : segs) {
      labels.insert(s.label);
      ++report.num_gt;
    }

  for (size_t i = 0; i < thresholds.size(); ++i) {
    double sum = 0.0;
    for (int label : labels) {
      const double ap = average_precision(dets, gts, label, thresholds[i]);
      report.ap_per_class[label].push_back(ap);
      sum += ap;
    }
    report.map_per_threshold.push_back(labels.empty() ? 0.0 : sum / static_cast<double>(labels.size()));
  }
  for (double m : report.map_per_threshold) report.average_map += m;
  report.average_map /= static_cast<double>(thresholds.size());
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["thresholds"] = report.thresholds;
  j["map_per_threshold"] = report.map_per_threshold;
  j["average_map"] = report.average_map;
  j["num_gt"] = report.num_gt;
  j["num_detections"] = report.num_detections;
  nlohmann::json percls = nlohmann::json::object();
  for (const auto& [label, aps] : report.ap_per_class) percls[std::to_string(label)] = aps;
  j["ap_per_class"] = percls;
  return j.dump(2);
}

Array64 similarity_matrix(const Array64& features) {
  const Eigen::Index tlen = features.cols();
  Array64 sim(tlen, tlen);
  Eigen::ArrayXd norms(tlen);
  for (Eigen::Index t = 0; t < tlen; ++t)
    norms(t) = std::sqrt(features.col(t).square().sum());
  for (Eigen::Index i = 0; i < tlen; ++i) {
    sim(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < tlen; ++j) {
      double v = 0.0;
      if (norms(i) > 0.0 && norms(j) > 0.0)
        v = (features.col(i) * features.col(j)).sum() / (norms(i) * norms(j));
      sim(i, j) = v;
      sim(j, i) = v;
    }
  }
  return sim;
}

double mean_off_diagonal(const Array64& square) {
  DYTAD_REQUIRE(square.rows() == square.cols(), "mean_off_diagonal: square matrix expected");
  const Eigen::Index n = square.rows();
  if (n <= 1) return 0.0;
  const double total = square.sum() - square.matrix().diagonal().sum();
  return total / static_cast<double>(n * (n - 1));
}

}  // namespace dytad
