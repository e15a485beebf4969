#pragma once

#include <map>
#include <string>
#include <vector>

#include "dytad/detection.hpp"
#include "dytad/tensor.hpp"

namespace dytad {

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<double> map_per_threshold;
  double average_map = 0.0;
  std::map<int, std::vector<double>> ap_per_class;  // label -> AP per threshold
  int num_gt = 0;
  int num_detections = 0;
};

// Ground truth grouped by video; segments carry labels and are in seconds.
using GtMap = std::map<std::string, std::vector<Segment>>;

double tiou(const Segment& a, const Segment& b);

// Greedy score-ordered matching at a fixed tIoU threshold, then all-point
// interpolated AP. dets must all carry the same label as the GT selection.
double average_precision(const std::vector<Detection>& dets, const GtMap& gts, int label,
                         double threshold);

std::vector<double> default_tiou_grid();  // 0.3 : 0.1 : 0.7

// Per-class AP averaged into mAP per threshold; classes without GT are
// excluded rather than scored 0.
EvalReport map_report(const std::vector<Detection>& dets, const GtMap& gts,
                      const std::vector<double>& thresholds);

std::string report_to_json(const EvalReport& report);

// Cosine similarity between feature columns; zero-norm columns count as 0
// against everything and 1 against themselves.
Array64 similarity_matrix(const Array64& features);  // (C x T) -> (T x T)

double mean_off_diagonal(const Array64& square);

}  // namespace dytad
