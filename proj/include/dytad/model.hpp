#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dytad/config.hpp"
#include "dytad/detection.hpp"
#include "dytad/dyhead.hpp"
#include "dytad/encoder.hpp"
#include "dytad/rng.hpp"

namespace dytad {

struct ForwardResult {
  FeaturePyramid<double> pyramid;    // encoder output, pre-head
  FeaturePyramid<double> cls_feats;  // classification trunk output
  FeaturePyramid<double> reg_feats;  // regression trunk output
  std::vector<Var<double>> cls_probs;  // per level, num_classes x T_level
  std::vector<Var<double>> reg;        // per level, 2 x T_level
};

// Full detector: shared encoder pyramid feeding two independent DyHead
// trunks (classification / regression), each ending in a k=3 conv head.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, Rng& rng);

  ForwardResult forward(const Array64& features, AttSink<double>* cls_sink = nullptr,
                        AttSink<double>* reg_sink = nullptr) const;

  // Stable-order enumeration of every trainable tensor; the names key the
  // optimizer state, EMA shadows and checkpoints. Vars are handles, so the
  // visitor may update values in place.
  void visit_params(const std::function<void(const std::string&, const Var<double>&)>& fn) const;

  // Pyramid lengths/strides for an input of length t, without a forward pass.
  std::vector<LevelMeta> level_meta(int t) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  EncoderParams<double> encoder_;
  DyHeadParams<double> cls_trunk_, reg_trunk_;
  HeadConvParams<double> cls_out_, reg_out_;
};

}  // namespace dytad
