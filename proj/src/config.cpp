#include "dytad/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace dytad {

Formation formation_from_string(const std::string& s) {
  if (s == "K") return Formation::K;
  if (s == "C") return Formation::C;
  if (s == "CK") return Formation::CK;
  fail("unknown formation: " + s);
}

Gate gate_from_string(const std::string& s) {
  if (s == "relu") return Gate::Relu;
  if (s == "rtanh") return Gate::RestrictedTanh;
  fail("unknown gate: " + s);
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "dyne") return EncoderKind::Dyne;
  if (s == "conv") return EncoderKind::Conv;
  fail("unknown encoder kind: " + s);
}

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
  DYTAD_REQUIRE(j.is_object(), what + ": JSON object expected");
  for (const auto& [key, val] : j.items())
    DYTAD_REQUIRE(known.count(key) != 0, what + ": unknown field '" + key + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json post_to_json(const PostprocessConfig& p) {
  return json{{"score_threshold", p.score_threshold},
              {"pre_nms_topk", p.pre_nms_topk},
              {"soft_nms_sigma", p.soft_nms_sigma},
              {"soft_nms_min_score", p.soft_nms_min_score},
              {"max_detections", p.max_detections}};
}

PostprocessConfig post_from_json(const json& j) {
  check_keys(j, {"score_threshold", "pre_nms_topk", "soft_nms_sigma", "soft_nms_min_score",
                 "max_detections"},
             "postprocess config");
  PostprocessConfig p;
  get_if(j, "score_threshold", p.score_threshold);
  get_if(j, "pre_nms_topk", p.pre_nms_topk);
  get_if(j, "soft_nms_sigma", p.soft_nms_sigma);
  get_if(j, "soft_nms_min_score", p.soft_nms_min_score);
  get_if(j, "max_detections", p.max_detections);
  return p;
}

json model_to_json(const ModelConfig& c) {
  return json{{"c_feat", c.c_feat},
              {"width", c.width},
              {"k", c.k},
              {"window_factor", c.window_factor},
              {"formation", c.formation},
              {"gate", c.gate},
              {"psi_kernel", c.psi_kernel},
              {"num_stem", c.num_stem},
              {"num_down", c.num_down},
              {"include_stem_level", c.include_stem_level},
              {"encoder", c.encoder},
              {"head_depth", c.head_depth},
              {"head_kernel", c.head_kernel},
              {"num_classes", c.num_classes},
              {"lambda_reg", c.lambda_reg},
              {"center_radius", c.center_radius},
              {"post", post_to_json(c.post)}};
}

ModelConfig model_from_json(const json& j) {
  check_keys(j,
             {"c_feat", "width", "k", "window_factor", "formation", "gate", "psi_kernel",
              "num_stem", "num_down", "include_stem_level", "encoder", "head_depth",
              "head_kernel", "num_classes", "lambda_reg", "center_radius", "post"},
             "model config");
  ModelConfig c;
  get_if(j, "c_feat", c.c_feat);
  get_if(j, "width", c.width);
  get_if(j, "k", c.k);
  get_if(j, "window_factor", c.window_factor);
  get_if(j, "formation", c.formation);
  get_if(j, "gate", c.gate);
  get_if(j, "psi_kernel", c.psi_kernel);
  get_if(j, "num_stem", c.num_stem);
  get_if(j, "num_down", c.num_down);
  get_if(j, "include_stem_level", c.include_stem_level);
  get_if(j, "encoder", c.encoder);
  get_if(j, "head_depth", c.head_depth);
  get_if(j, "head_kernel", c.head_kernel);
  get_if(j, "num_classes", c.num_classes);
  get_if(j, "lambda_reg", c.lambda_reg);
  get_if(j, "center_radius", c.center_radius);
  if (j.contains("post")) c.post = post_from_json(j.at("post"));
  DYTAD_REQUIRE(c.window_factor >= 1 && c.head_depth >= 1 && c.num_down >= 1,
                "model config: w, D and num_down must be >= 1");
  DYTAD_REQUIRE(c.k >= 1 && c.k % 2 == 1, "model config: k must be odd");
  formation_from_string(c.formation);
  gate_from_string(c.gate);
  encoder_kind_from_string(c.encoder);
  return c;
}

json train_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"warmup_epochs", c.warmup_epochs},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"grad_clip", c.grad_clip},
              {"ema_decay", c.ema_decay},
              {"batch_size", c.batch_size},
              {"max_input_length", c.max_input_length},
              {"seed", c.seed},
              {"map_eval_interval", c.map_eval_interval},
              {"early_stop_map", c.early_stop_map}};
}

TrainConfig train_from_json(const json& j) {
  check_keys(j,
             {"epochs", "warmup_epochs", "lr", "weight_decay", "grad_clip", "ema_decay",
              "batch_size", "max_input_length", "seed", "map_eval_interval", "early_stop_map"},
             "train config");
  TrainConfig c;
  get_if(j, "epochs", c.epochs);
  get_if(j, "warmup_epochs", c.warmup_epochs);
  get_if(j, "lr", c.lr);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "grad_clip", c.grad_clip);
  get_if(j, "ema_decay", c.ema_decay);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "max_input_length", c.max_input_length);
  get_if(j, "seed", c.seed);
  get_if(j, "map_eval_interval", c.map_eval_interval);
  get_if(j, "early_stop_map", c.early_stop_map);
  DYTAD_REQUIRE(c.epochs >= 1 && c.warmup_epochs >= 0 && c.warmup_epochs < c.epochs,
                "train config: need 0 <= warmup < epochs");
  DYTAD_REQUIRE(c.lr > 0 && c.batch_size >= 1 && c.max_input_length >= 2,
                "train config: positive lr/batch/input length required");
  return c;
}

json synth_to_json(const SynthConfig& c) {
  return json{{"seed", c.seed},           {"num_train", c.num_train},
              {"num_test", c.num_test},   {"t", c.t},
              {"num_classes", c.num_classes}, {"c_feat", c.c_feat},
              {"noise_level", c.noise_level}, {"feature_stride_s", c.feature_stride_s}};
}

SynthConfig synth_from_json(const json& j) {
  check_keys(j,
             {"seed", "num_train", "num_test", "t", "num_classes", "c_feat", "noise_level",
              "feature_stride_s"},
             "synth config");
  SynthConfig c;
  get_if(j, "seed", c.seed);
  get_if(j, "num_train", c.num_train);
  get_if(j, "num_test", c.num_test);
  get_if(j, "t", c.t);
  get_if(j, "num_classes", c.num_classes);
  get_if(j, "c_feat", c.c_feat);
  get_if(j, "noise_level", c.noise_level);
  get_if(j, "feature_stride_s", c.feature_stride_s);
  DYTAD_REQUIRE(c.num_train >= 1 && c.t >= 8 && c.num_classes >= 1 && c.c_feat >= 1,
                "synth config: implausible sizes");
  DYTAD_REQUIRE(c.noise_level >= 0.0 && c.feature_stride_s > 0.0,
                "synth config: noise/stride out of range");
  return c;
}

json parse(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  DYTAD_REQUIRE(!j.is_discarded(), std::string(what) + ": invalid JSON");
  return j;
}

}  // namespace

ModelConfig model_config_from_json(const std::string& text) {
  return model_from_json(parse(text, "model config"));
}
std::string model_config_to_json(const ModelConfig& cfg) { return model_to_json(cfg).dump(2); }

TrainConfig train_config_from_json(const std::string& text) {
  return train_from_json(parse(text, "train config"));
}
std::string train_config_to_json(const TrainConfig& cfg) { return train_to_json(cfg).dump(2); }

SynthConfig synth_config_from_json(const std::string& text) {
  return synth_from_json(parse(text, "synth config"));
}
std::string synth_config_to_json(const SynthConfig& cfg) { return synth_to_json(cfg).dump(2); }

RunConfig run_config_from_file(const std::string& path) {
  std::ifstream in(path);
  DYTAD_REQUIRE(in.good(), "config file not readable: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = parse(text, "config file");
  check_keys(j, {"model", "train", "synth"}, "config file");
  RunConfig rc;
  if (j.contains("model")) rc.model = model_from_json(j.at("model"));
  if (j.contains("train")) rc.train = train_from_json(j.at("train"));
  if (j.contains("synth")) rc.synth = synth_from_json(j.at("synth"));
  return rc;
}

}  // namespace dytad
