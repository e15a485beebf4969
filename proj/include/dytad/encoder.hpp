#pragma once

#include <vector>

#include "dytad/dfa.hpp"
#include "dytad/ops.hpp"
#include "dytad/tensor.hpp"

namespace dytad {

template <typename S>
struct LnParams {
  Var<S> gain;    // C x 1
  Var<S> offset;  // C x 1
};

template <typename S>
Var<S> apply_ln(const Var<S>& x, const LnParams<S>& p) {
  return layer_norm(x, p.gain, p.offset);
}

// Projection stem: two (conv k=3 -> LN -> relu) blocks, C_feat -> C.
template <typename S>
struct EmbedParams {
  Var<S> w1, b1;  // C x 3*C_feat, C x 1
  LnParams<S> ln1;
  Var<S> w2, b2;  // C x 3*C, C x 1
  LnParams<S> ln2;
};

template <typename S>
Var<S> conv3(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  return pointwise_conv(shift(x, 3).data, w, b);
}

template <typename S>
Var<S> embed(const Var<S>& raw, const EmbedParams<S>& p) {
  Var<S> h = relu(apply_ln(conv3(raw, p.w1, p.b1), p.ln1));
  return relu(apply_ln(conv3(h, p.w2, p.b2), p.ln2));
}

// Instance-level branch: the layer-normed features are channel-averaged to
// a 1xT signal, gated, broadcast over channels, and aggregated by a k=1
// depthwise kernel.
template <typename S>
struct InstanceBranch {
  Var<S> psi_w;   // 1 x psi_kernel
  Var<S> psi_b;   // 1 x 1
  Var<S> kernel;  // C x 1
  Var<S> bias;    // optional, C x 1
  Gate gate = Gate::Relu;
};

template <typename S>
struct DynELayerParams {
  bool downsample = false;
  LnParams<S> ln;
  DfaParams<S> window_branch;  // depthwise, kernel k, window factor w
  InstanceBranch<S> instance;
};

// f_dyn = f_k + f_ins + DS(f). Both dynamic branches read one shared LN of
// DS(f); only the residual term carries the raw stream.  Gating the
// normalized tensor keeps both branch magnitudes bounded by the LN scale, so
// the residual stream grows additively with depth instead of being rescaled
// multiplicatively at every layer.
template <typename S>
Var<S> dyne_layer(const Var<S>& f, const DynELayerParams<S>& p) {
  DYTAD_REQUIRE(!p.downsample || f.cols() >= 2, "dyne_layer: downsampling needs T >= 2");
  Var<S> x = p.downsample ? max_pool_ds2(f) : f;
  Var<S> z = apply_ln(x, p.ln);
  Var<S> f_k = dfa_conv(z, p.window_branch);
  Var<S> g = apply_gate(
      add(depthwise_conv1d(mean_over_channels(z), p.instance.psi_w), p.instance.psi_b),
      p.instance.gate);
  Var<S> f_ins = mul(mul(z, g), p.instance.kernel);
  if (p.instance.bias.defined()) f_ins = add(f_ins, p.instance.bias);
  return add(add(f_k, f_ins), x);
}

// Matched static baseline: residual plain (dense) convolution with the same
// width, depth and tap footprint (k taps dilated by the window factor) as
// the dynamic layer, so the feature-discriminability diagnostic isolates the
// dynamics rather than the receptive field.
template <typename S>
struct ConvEncLayerParams {
  bool downsample = false;
  int window = 1;
  LnParams<S> ln;
  Var<S> w;     // C x k*C
  Var<S> bias;  // C x 1
};

template <typename S>
Var<S> conv_enc_layer(const Var<S>& f, const ConvEncLayerParams<S>& p) {
  DYTAD_REQUIRE(!p.downsample || f.cols() >= 2, "conv_enc_layer: downsampling needs T >= 2");
  Var<S> x = p.downsample ? max_pool_ds2(f) : f;
  const int k = static_cast<int>(p.w.cols() / x.rows());
  DYTAD_REQUIRE(p.w.cols() == k * x.rows(), "conv_enc_layer: kernel width not a multiple of C");
  return add(pointwise_conv(shift(apply_ln(x, p.ln), k, p.window).data, p.w, p.bias), x);
}

template <typename S>
struct FeatureMap {
  Var<S> data;     // C x T_level
  int stride = 1;  // relative to the input grid
  int level = 0;
};

template <typename S>
using FeaturePyramid = std::vector<FeatureMap<S>>;

enum class EncoderKind { Dyne, Conv };

template <typename S>
struct EncoderParams {
  EncoderKind kind = EncoderKind::Dyne;
  bool include_stem_level = false;
  EmbedParams<S> embed;
  std::vector<DynELayerParams<S>> dyne_layers;      // stems first, then downsampling
  std::vector<ConvEncLayerParams<S>> conv_layers;   // parallel structure for kind == Conv
  std::vector<LnParams<S>> level_ln;                // one per pyramid level

  int num_down() const {
    int n = 0;
    if (kind == EncoderKind::Dyne)
      for (const auto& l : dyne_layers) n += l.downsample ? 1 : 0;
    else
      for (const auto& l : conv_layers) n += l.downsample ? 1 : 0;
    return n;
  }
};

// embed -> stem layers -> downsampling layers; the pyramid collects the
// LN-normalized output of every downsampling layer (optionally preceded by
// the stem output at stride 1).
template <typename S>
FeaturePyramid<S> build_pyramid(const Var<S>& raw, const EncoderParams<S>& p) {
  DYTAD_REQUIRE(raw.cols() >= (Eigen::Index(1) << p.num_down()),
                "build_pyramid: input too short for the downsampling depth");
  Var<S> h = embed(raw, p.embed);
  FeaturePyramid<S> pyr;
  size_t level_at = 0;
  auto push_level = [&](const Var<S>& v, int stride) {
    DYTAD_REQUIRE(level_at < p.level_ln.size(), "build_pyramid: missing level LN params");
    pyr.push_back({apply_ln(v, p.level_ln[level_at]), stride, static_cast<int>(pyr.size())});
    ++level_at;
  };

  int stride = 1;
  const size_t n_layers =
      p.kind == EncoderKind::Dyne ? p.dyne_layers.size() : p.conv_layers.size();
  for (size_t i = 0; i < n_layers; ++i) {
    const bool down = p.kind == EncoderKind::Dyne ? p.dyne_layers[i].downsample
                                                  : p.conv_layers[i].downsample;
    const bool first_down = down && stride == 1;
    if (first_down && p.include_stem_level) push_level(h, stride);
    h = p.kind == EncoderKind::Dyne ? dyne_layer(h, p.dyne_layers[i])
                                    : conv_enc_layer(h, p.conv_layers[i]);
    if (down) {
      stride *= 2;
      push_level(h, stride);
    }
  }
  DYTAD_REQUIRE(!pyr.empty(), "build_pyramid: no downsampling layers configured");
  return pyr;
}

}  // namespace dytad
