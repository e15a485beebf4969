#pragma once

#include <cstdint>
#include <string>

#include "dytad/detection.hpp"
#include "dytad/dfa.hpp"
#include "dytad/encoder.hpp"

namespace dytad {

struct ModelConfig {
  int c_feat = 16;
  int width = 16;
  int k = 3;
  int window_factor = 5;
  std::string formation = "K";  // K | C | CK
  std::string gate = "relu";    // relu | rtanh
  int psi_kernel = 3;
  int num_stem = 2;
  int num_down = 5;
  bool include_stem_level = false;
  std::string encoder = "dyne";  // dyne | conv
  int head_depth = 3;
  int head_kernel = 3;
  int num_classes = 3;
  double lambda_reg = 1.0;
  double center_radius = 1.5;
  PostprocessConfig post;
};

struct TrainConfig {
  int epochs = 300;
  int warmup_epochs = 30;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double grad_clip = 1.0;
  double ema_decay = 0.999;
  int batch_size = 4;
  // Crop cap below the synthetic video length (256) so every epoch sees a
  // different window of each video; without that augmentation the small
  // training split is memorized and held-out mAP collapses.
  int max_input_length = 160;
  uint64_t seed = 1;
  // train-split mAP@0.5 probe cadence and early-stop bar (0 disables either)
  int map_eval_interval = 20;
  double early_stop_map = 0.95;
};

struct SynthConfig {
  uint64_t seed = 7;
  int num_train = 32;
  int num_test = 8;
  int t = 256;
  int num_classes = 3;
  int c_feat = 16;
  double noise_level = 0.5;
  double feature_stride_s = 1.0;
};

Formation formation_from_string(const std::string& s);
Gate gate_from_string(const std::string& s);
EncoderKind encoder_kind_from_string(const std::string& s);

// JSON round-trips. Loading accepts partial objects: absent fields keep
// their defaults; unknown fields are an error.
ModelConfig model_config_from_json(const std::string& text);
std::string model_config_to_json(const ModelConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

// Combined config file {"model": {...}, "train": {...}, "synth": {...}};
// every section optional.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthConfig synth;
};
RunConfig run_config_from_file(const std::string& path);

}  // namespace dytad
