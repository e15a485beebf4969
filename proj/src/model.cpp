#include "dytad/model.hpp"

#include <cmath>

namespace dytad {

namespace {

using V = Var<double>;

LnParams<double> init_ln(int c) {
  return {V::param(Array64::Ones(c, 1)), V::param(Array64::Zero(c, 1))};
}

// Aggregation kernels are zero-mean 1/sqrt(fan-in); the Ψ stage closest to
// the gate starts with bias +1 so initial masks sit near all-ones and the
// operator starts close to a plain convolution.
DfaParams<double> init_dfa(Rng& rng, int c_in, int c_out, int k, Formation formation, Gate gate,
                           int window, bool depthwise, bool with_bias, int psi_kernel) {
  DfaParams<double> p;
  p.c_in = c_in;
  p.c_out = c_out;
  p.k = k;
  p.formation = formation;
  p.gate = gate;
  p.window = window;
  p.depthwise = depthwise;
  p.psi_kernel = psi_kernel;
  p.kernel = depthwise ? V::param(init_weight(rng, c_in, k, k))
                       : V::param(init_weight(rng, c_out, k * c_in, k * c_in));
  if (with_bias) p.bias = V::param(Array64::Zero(c_out, 1));
  const int c_m = p.mask_rows();
  p.psi_dw = V::param(init_weight(rng, c_in, psi_kernel, psi_kernel));
  if (c_m != c_in) {
    p.psi_dw_bias = V::param(Array64::Zero(c_in, 1));
    p.psi_pw = V::param(init_weight(rng, c_m, c_in, c_in));
    p.psi_pw_bias = V::param(Array64::Ones(c_m, 1));
  } else {
    p.psi_dw_bias = V::param(Array64::Ones(c_in, 1));
  }
  return p;
}

DfaParams<double> init_att(Rng& rng, int c, int k, Gate gate, int psi_kernel) {
  return init_dfa(rng, c, c, k, Formation::K, gate, 1, true, true, psi_kernel);
}

DyHeadDepthParams<double> init_depth_round(Rng& rng, const ModelConfig& cfg) {
  DyHeadDepthParams<double> d;
  d.down_path = init_att(rng, cfg.width, cfg.head_kernel, gate_from_string(cfg.gate), cfg.psi_kernel);
  d.up_path = init_att(rng, cfg.width, cfg.head_kernel, gate_from_string(cfg.gate), cfg.psi_kernel);
  d.depth_path = init_att(rng, cfg.width, cfg.head_kernel, gate_from_string(cfg.gate), cfg.psi_kernel);
  d.ln_down = init_ln(cfg.width);
  d.ln_up = init_ln(cfg.width);
  d.gamma = V::param(Array64::Ones(1, 1));
  d.alpha = V::param(Array64::Ones(1, 1));
  return d;
}

// initial classification probability ~1%, the usual focal-loss head init
constexpr double kClsPrior = 0.01;

}  // namespace

Model::Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  const int c = cfg.width;
  const Formation formation = formation_from_string(cfg.formation);
  const Gate gate = gate_from_string(cfg.gate);

  encoder_.kind = encoder_kind_from_string(cfg.encoder);
  encoder_.include_stem_level = cfg.include_stem_level;
  encoder_.embed.w1 = V::param(init_weight(rng, c, 3 * cfg.c_feat, 3 * cfg.c_feat));
  encoder_.embed.b1 = V::param(Array64::Zero(c, 1));
  encoder_.embed.ln1 = init_ln(c);
  encoder_.embed.w2 = V::param(init_weight(rng, c, 3 * c, 3 * c));
  encoder_.embed.b2 = V::param(Array64::Zero(c, 1));
  encoder_.embed.ln2 = init_ln(c);

  const int n_layers = cfg.num_stem + cfg.num_down;
  for (int i = 0; i < n_layers; ++i) {
    const bool down = i >= cfg.num_stem;
    if (encoder_.kind == EncoderKind::Dyne) {
      DynELayerParams<double> layer;
      layer.downsample = down;
      layer.ln = init_ln(c);
      // bias-free dynamic branches: a per-layer additive bias is the same
      // C-vector at every timestamp, and across seven residual layers those
      // constants accumulate into a time-shared direction that dominates the
      // deepest level and erases the very discriminability the dynamic
      // branches exist to provide
      layer.window_branch = init_dfa(rng, c, c, cfg.k, formation, gate, cfg.window_factor,
                                     /*depthwise=*/true, /*with_bias=*/false, cfg.psi_kernel);
      layer.instance.psi_w = V::param(init_weight(rng, 1, cfg.psi_kernel, cfg.psi_kernel));
      layer.instance.psi_b = V::param(Array64::Ones(1, 1));
      layer.instance.kernel = V::param(init_weight(rng, c, 1, 1));
      layer.instance.gate = gate;
      encoder_.dyne_layers.push_back(std::move(layer));
    } else {
      ConvEncLayerParams<double> layer;
      layer.downsample = down;
      layer.window = cfg.window_factor;
      layer.ln = init_ln(c);
      layer.w = V::param(init_weight(rng, c, cfg.k * c, cfg.k * c));
      layer.bias = V::param(Array64::Zero(c, 1));
      encoder_.conv_layers.push_back(std::move(layer));
    }
  }
  const int n_levels = cfg.num_down + (cfg.include_stem_level ? 1 : 0);
  for (int i = 0; i < n_levels; ++i) encoder_.level_ln.push_back(init_ln(c));

  for (int d = 0; d < cfg.head_depth; ++d) cls_trunk_.rounds.push_back(init_depth_round(rng, cfg));
  for (int d = 0; d < cfg.head_depth; ++d) reg_trunk_.rounds.push_back(init_depth_round(rng, cfg));

  cls_out_.w = V::param(init_weight(rng, cfg.num_classes, 3 * c, 3 * c));
  cls_out_.b = V::param(
      Array64::Constant(cfg.num_classes, 1, -std::log((1.0 - kClsPrior) / kClsPrior)));
  reg_out_.w = V::param(init_weight(rng, 2, 3 * c, 3 * c));
  reg_out_.b = V::param(Array64::Zero(2, 1));
}

ForwardResult Model::forward(const Array64& features, AttSink<double>* cls_sink,
                             AttSink<double>* reg_sink) const {
  DYTAD_REQUIRE(features.rows() == cfg_.c_feat, "forward: feature channel mismatch");
  ForwardResult r;
  r.pyramid = build_pyramid(V::constant(features), encoder_);
  r.cls_feats = dyhead_forward(r.pyramid, cls_trunk_, cls_sink);
  r.reg_feats = dyhead_forward(r.pyramid, reg_trunk_, reg_sink);
  for (const auto& level : r.cls_feats) r.cls_probs.push_back(classify(level.data, cls_out_));
  for (const auto& level : r.reg_feats) r.reg.push_back(regress(level.data, reg_out_));
  return r;
}

namespace {

using Visitor = std::function<void(const std::string&, const Var<double>&)>;

void visit_ln(const Visitor& fn, const std::string& prefix, const LnParams<double>& ln) {
  fn(prefix + ".gain", ln.gain);
  fn(prefix + ".offset", ln.offset);
}

void visit_dfa(const Visitor& fn, const std::string& prefix, const DfaParams<double>& p) {
  fn(prefix + ".kernel", p.kernel);
  if (p.bias.defined()) fn(prefix + ".bias", p.bias);
  fn(prefix + ".psi_dw", p.psi_dw);
  fn(prefix + ".psi_dw_bias", p.psi_dw_bias);
  if (p.psi_pw.defined()) {
    fn(prefix + ".psi_pw", p.psi_pw);
    fn(prefix + ".psi_pw_bias", p.psi_pw_bias);
  }
}

void visit_trunk(const Visitor& fn, const std::string& prefix, const DyHeadParams<double>& trunk) {
  for (size_t d = 0; d < trunk.rounds.size(); ++d) {
    const auto& round = trunk.rounds[d];
    const std::string base = prefix + ".d" + std::to_string(d);
    visit_dfa(fn, base + ".down", round.down_path);
    visit_dfa(fn, base + ".up", round.up_path);
    visit_dfa(fn, base + ".depth", round.depth_path);
    visit_ln(fn, base + ".ln_down", round.ln_down);
    visit_ln(fn, base + ".ln_up", round.ln_up);
    fn(base + ".gamma", round.gamma);
    fn(base + ".alpha", round.alpha);
  }
}

}  // namespace

void Model::visit_params(const Visitor& fn) const {
  fn("embed.w1", encoder_.embed.w1);
  fn("embed.b1", encoder_.embed.b1);
  visit_ln(fn, "embed.ln1", encoder_.embed.ln1);
  fn("embed.w2", encoder_.embed.w2);
  fn("embed.b2", encoder_.embed.b2);
  visit_ln(fn, "embed.ln2", encoder_.embed.ln2);

  for (size_t i = 0; i < encoder_.dyne_layers.size(); ++i) {
    const auto& layer = encoder_.dyne_layers[i];
    const std::string base = "enc.layer" + std::to_string(i);
    visit_ln(fn, base + ".ln", layer.ln);
    visit_dfa(fn, base + ".window", layer.window_branch);
    fn(base + ".ins.psi_w", layer.instance.psi_w);
    fn(base + ".ins.psi_b", layer.instance.psi_b);
    fn(base + ".ins.kernel", layer.instance.kernel);
    if (layer.instance.bias.defined()) fn(base + ".ins.bias", layer.instance.bias);
  }
  for (size_t i = 0; i < encoder_.conv_layers.size(); ++i) {
    const auto& layer = encoder_.conv_layers[i];
    const std::string base = "enc.layer" + std::to_string(i);
    visit_ln(fn, base + ".ln", layer.ln);
    fn(base + ".w", layer.w);
    fn(base + ".bias", layer.bias);
  }
  for (size_t i = 0; i < encoder_.level_ln.size(); ++i)
    visit_ln(fn, "enc.level" + std::to_string(i) + ".ln", encoder_.level_ln[i]);

  visit_trunk(fn, "cls", cls_trunk_);
  visit_trunk(fn, "reg", reg_trunk_);
  fn("cls_out.w", cls_out_.w);
  fn("cls_out.b", cls_out_.b);
  fn("reg_out.w", reg_out_.w);
  fn("reg_out.b", reg_out_.b);
}

std::vector<LevelMeta> Model::level_meta(int t) const {
  DYTAD_REQUIRE(t >= (1 << cfg_.num_down), "level_meta: input too short");
  std::vector<LevelMeta> out;
  int len = t, stride = 1;
  if (cfg_.include_stem_level) out.push_back({len, stride});
  for (int l = 0; l < cfg_.num_down; ++l) {
    len = (len + 1) / 2;
    stride *= 2;
    out.push_back({len, stride});
  }
  return out;
}

}  // namespace dytad
