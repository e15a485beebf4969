#pragma once

#include <map>
#include <string>
#include <vector>

#include "dytad/data.hpp"
#include "dytad/evaluation.hpp"
#include "dytad/model.hpp"

namespace dytad {

// Linear warmup to the base rate, then cosine decay toward 0 over the
// remaining epochs.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Decoupled-weight-decay Adam over the model's named parameters.
class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  void set_lr(double lr) { lr_ = lr; }

  // Applies one update from the gradients accumulated on the parameters,
  // then clears them. Biases, gains and other 1-column tensors are exempt
  // from weight decay.
  void step(Model& model);

 private:
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, Array64> m_, v_;
};

// Exponential moving average of the parameters; evaluation swaps the
// shadow values in and back out.
class Ema {
 public:
  Ema() = default;
  Ema(Model& model, double decay);
  void update(Model& model);
  void swap(Model& model);  // exchange shadow and live values
  const std::map<std::string, Array64>& shadow() const { return shadow_; }
  std::map<std::string, Array64>& shadow() { return shadow_; }

 private:
  double decay_ = 0.999;
  std::map<std::string, Array64> shadow_;
};

// Global gradient clipping; returns the pre-clip norm.
double clip_grad_norm(Model& model, double max_norm);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_map = -1.0;  // -1 when not probed this epoch
};

struct TrainResult {
  std::vector<EpochLog> log;
  int epochs_run = 0;
  double final_train_map = -1.0;
};

// Full training loop: seeded shuffling, random cropping, batch-averaged
// loss by gradient accumulation, AdamW with the warmup/cosine schedule,
// gradient clipping and an EMA copy. A non-finite loss aborts with a
// diagnostic dump next to `dump_dir` (when set).
TrainResult train(Model& model, Ema& ema, const Dataset& data, const TrainConfig& cfg,
                  const std::string& dump_dir = "");

// Detections for one video (full-sequence forward + postprocess).
std::vector<Detection> infer_video(const Model& model, const VideoSample& video);

// Detections for a whole split, in dataset order.
std::vector<Detection> infer_dataset(const Model& model, const Dataset& data);

// mAP of the model (current parameter values) over a split.
EvalReport evaluate_model(const Model& model, const Dataset& data,
                          const std::vector<double>& thresholds);

// Checkpoint: model config + raw parameters + EMA shadows, JSON,
// round-trip exact.
void save_checkpoint(const std::string& path, const Model& model, const Ema& ema);
void load_checkpoint(const std::string& path, Model& model, Ema& ema);

// Deepest-level mean off-diagonal cosine similarity, averaged over a split.
// Lower values mean more temporally discriminative deep features.
double mean_feature_similarity(const Model& model, const Dataset& data);

}  // namespace dytad
