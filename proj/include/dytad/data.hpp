#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dytad/config.hpp"
#include "dytad/detection.hpp"
#include "dytad/evaluation.hpp"
#include "dytad/rng.hpp"
#include "dytad/tensor.hpp"

namespace dytad {

struct VideoSample {
  std::string video_id;
  Array32 features;  // C_feat x T, float32 as stored on disk
  double duration_s = 0.0;
  double feature_stride_s = 1.0;
  std::vector<Segment> annotations;  // seconds
};

using Dataset = std::vector<VideoSample>;

// Binary feature container: "DFT1" | version u32 | C u32 | T u32 |
// C*T little-endian float32, channel-major.
void write_feature_file(const std::string& path, const Array32& features);
Array32 read_feature_file(const std::string& path);

// {video_id: {duration_s, feature_stride_s, annotations: [{segment, label}]}}
// Features are not stored here; loaders pair ids with <dir>/<id>.dft.
void write_annotations(const std::string& path, const Dataset& videos);
void read_annotations(const std::string& path, Dataset& videos);  // fills all but features

void write_detections(const std::string& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::string& path);

// Dataset laid out as <dir>/annotations.json + <dir>/features/<id>.dft.
void save_dataset(const std::string& dir, const Dataset& videos);
Dataset load_dataset(const std::string& dir);

// Synthetic videos: Gaussian background noise plus one deterministic
// unit-norm channel pattern per class, superimposed over each instance
// span. Both splits come from one seeded stream.
std::pair<Dataset, Dataset> synth_dataset(const SynthConfig& cfg);

// Random contiguous crop to max_len timestamps (annotations clipped and
// re-anchored); identity when the video is short enough.
VideoSample random_crop(const VideoSample& v, int max_len, Rng& rng);

GtMap gt_by_video(const Dataset& videos);

}  // namespace dytad
