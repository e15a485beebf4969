#include "dytad/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace dytad {

using json = nlohmann::ordered_json;

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  DYTAD_REQUIRE(epoch >= 0 && epoch < cfg.epochs, "lr_at_epoch: epoch out of range");
  if (epoch < cfg.warmup_epochs)
    return cfg.lr * static_cast<double>(epoch + 1) / cfg.warmup_epochs;
  const double span = std::max(cfg.epochs - cfg.warmup_epochs, 1);
  const double progress = (epoch - cfg.warmup_epochs) / span;
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(Model& model) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  model.visit_params([&](const std::string& name, const Var<double>& p) {
    if (!p.has_grad()) return;  // parameter never touched this step
    Array64& w = p.values_mut();
    const Array64 g = p.grad();
    Array64& m = m_[name];
    Array64& v = v_[name];
    if (m.size() == 0) {
      m = Array64::Zero(w.rows(), w.cols());
      v = Array64::Zero(w.rows(), w.cols());
    }
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.square();
    const Array64 m_hat = m / bc1;
    const Array64 v_hat = v / bc2;
    if (weight_decay_ > 0.0 && w.cols() > 1) w -= lr_ * weight_decay_ * w;
    w -= lr_ * m_hat / (v_hat.sqrt() + eps_);
    p.clear_grad();
  });
}

Ema::Ema(Model& model, double decay) : decay_(decay) {
  model.visit_params(
      [&](const std::string& name, const Var<double>& p) { shadow_[name] = p.value(); });
}

void Ema::update(Model& model) {
  model.visit_params([&](const std::string& name, const Var<double>& p) {
    Array64& s = shadow_.at(name);
    s = decay_ * s + (1.0 - decay_) * p.value();
  });
}

void Ema::swap(Model& model) {
  model.visit_params([&](const std::string& name, const Var<double>& p) {
    Array64& s = shadow_.at(name);
    Array64 tmp = p.value();
    p.values_mut() = s;
    s = tmp;
  });
}

double clip_grad_norm(Model& model, double max_norm) {
  double sq = 0.0;
  model.visit_params([&](const std::string&, const Var<double>& p) {
    if (p.has_grad()) sq += p.grad().square().sum();
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    model.visit_params([&](const std::string&, const Var<double>& p) {
      if (p.has_grad()) p.grad_mut() *= scale;
    });
  }
  return norm;
}

namespace {

// Ground truth of one sample in feature-grid units, ready for target
// assignment.
std::vector<Segment> grid_segments(const VideoSample& v) {
  std::vector<Segment> out;
  out.reserve(v.annotations.size());
  for (const Segment& s : v.annotations)
    out.push_back({s.t_start / v.feature_stride_s, s.t_end / v.feature_stride_s, s.label});
  return out;
}

void dump_diagnostics(const std::string& dump_dir, const Model& model, int epoch, double loss) {
  json j;
  j["epoch"] = epoch;
  j["loss"] = loss;
  json params = json::object();
  model.visit_params([&](const std::string& name, const Var<double>& p) {
    json entry;
    entry["min"] = p.value().minCoeff();
    entry["max"] = p.value().maxCoeff();
    entry["finite"] = static_cast<bool>(p.value().isFinite().all());
    params[name] = entry;
  });
  j["params"] = params;
  std::ofstream out(dump_dir + "/nan_dump.json");
  out << j.dump(2) << "\n";
}

}  // namespace

TrainResult train(Model& model, Ema& ema, const Dataset& data, const TrainConfig& cfg,
                  const std::string& dump_dir) {
  DYTAD_REQUIRE(!data.empty(), "train: empty dataset");
  Rng rng(cfg.seed);
  AdamW opt(cfg.lr, cfg.weight_decay);
  TrainResult result;

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    opt.set_lr(lr);
    // seeded Fisher-Yates keeps the whole run reproducible
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

    double epoch_loss = 0.0;
    int num_batches = 0;
    for (size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const size_t batch_end = std::min(pos + cfg.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
      double batch_loss = 0.0;
      for (size_t b = pos; b < batch_end; ++b) {
        VideoSample sample = random_crop(data[order[b]], cfg.max_input_length, rng);
        const int t = static_cast<int>(sample.features.cols());
        const auto levels = model.level_meta(t);
        const auto assign = assign_targets(grid_segments(sample), levels, model.config().num_classes,
                                           model.config().center_radius);
        ForwardResult fwd = model.forward(sample.features.cast<double>());
        TotalLoss loss = total_loss(fwd.cls_probs, fwd.reg, assign, model.config().lambda_reg);
        Var<double> scaled = loss.total * Var<double>::scalar(inv_batch);
        backward(scaled);
        batch_loss += loss.total.value()(0, 0) * inv_batch;
      }
      if (!std::isfinite(batch_loss)) {
        if (!dump_dir.empty()) dump_diagnostics(dump_dir, model, epoch, batch_loss);
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      clip_grad_norm(model, cfg.grad_clip);
      opt.step(model);
      ema.update(model);
      epoch_loss += batch_loss;
      ++num_batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.loss = epoch_loss / std::max(num_batches, 1);
    const bool probe = cfg.map_eval_interval > 0 && (epoch + 1) % cfg.map_eval_interval == 0;
    if (probe) {
      ema.swap(model);
      log.train_map = evaluate_model(model, data, {0.5}).average_map;
      ema.swap(model);
      result.final_train_map = log.train_map;
    }
    result.log.push_back(log);
    result.epochs_run = epoch + 1;
    if (probe && log.train_map >= cfg.early_stop_map) break;
  }
  return result;
}

std::vector<Detection> infer_video(const Model& model, const VideoSample& video) {
  ForwardResult fwd = model.forward(video.features.cast<double>());
  std::vector<Array64> cls, reg;
  for (const auto& p : fwd.cls_probs) cls.push_back(p.value());
  for (const auto& r : fwd.reg) reg.push_back(r.value());
  const auto levels = model.level_meta(static_cast<int>(video.features.cols()));
  return postprocess(video.video_id, cls, reg, levels, video.feature_stride_s, video.duration_s,
                     model.config().post);
}

std::vector<Detection> infer_dataset(const Model& model, const Dataset& data) {
  std::vector<Detection> out;
  for (const VideoSample& v : data) {
    auto dets = infer_video(model, v);
    out.insert(out.end(), dets.begin(), dets.end());
  }
  return out;
}

EvalReport evaluate_model(const Model& model, const Dataset& data,
                          const std::vector<double>& thresholds) {
  return map_report(infer_dataset(model, data), gt_by_video(data), thresholds);
}

namespace {

json array_to_json(const Array64& a) {
  json j;
  j["rows"] = a.rows();
  j["cols"] = a.cols();
  json flat = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) flat.push_back(a(r, c));
  j["data"] = flat;
  return j;
}

Array64 array_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& flat = j.at("data");
  DYTAD_REQUIRE(static_cast<Eigen::Index>(flat.size()) == rows * cols,
                "checkpoint: array size mismatch");
  Array64 a(rows, cols);
  size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = flat[i++].get<double>();
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Ema& ema) {
  json j;
  j["format"] = "dytad-checkpoint";
  j["version"] = 1;
  j["model_config"] = json::parse(model_config_to_json(model.config()));
  json params = json::object();
  model.visit_params([&](const std::string& name, const Var<double>& p) {
    params[name] = array_to_json(p.value());
  });
  j["params"] = params;
  json shadows = json::object();
  for (const auto& [name, a] : ema.shadow()) shadows[name] = array_to_json(a);
  j["ema"] = shadows;
  std::ofstream out(path);
  DYTAD_REQUIRE(out.good(), "save_checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

void load_checkpoint(const std::string& path, Model& model, Ema& ema) {
  std::ifstream in(path);
  DYTAD_REQUIRE(in.good(), "load_checkpoint: cannot open " + path);
  json j = json::parse(in);
  DYTAD_REQUIRE(j.at("format").get<std::string>() == "dytad-checkpoint",
                "load_checkpoint: not a checkpoint file");
  const ModelConfig cfg = model_config_from_json(j.at("model_config").dump());
  Rng rng(0);
  model = Model(cfg, rng);
  const auto& params = j.at("params");
  size_t seen = 0;
  model.visit_params([&](const std::string& name, const Var<double>& p) {
    DYTAD_REQUIRE(params.contains(name), "load_checkpoint: missing parameter " + name);
    Array64 a = array_from_json(params.at(name));
    DYTAD_REQUIRE(a.rows() == p.value().rows() && a.cols() == p.value().cols(),
                  "load_checkpoint: shape mismatch for " + name);
    p.values_mut() = a;
    ++seen;
  });
  DYTAD_REQUIRE(seen == params.size(), "load_checkpoint: extra parameters in file");
  ema.shadow().clear();
  for (const auto& [name, entry] : j.at("ema").items())
    ema.shadow()[name] = array_from_json(entry);
}

double mean_feature_similarity(const Model& model, const Dataset& data) {
  DYTAD_REQUIRE(!data.empty(), "mean_feature_similarity: empty dataset");
  double total = 0.0;
  for (const VideoSample& v : data) {
    ForwardResult fwd = model.forward(v.features.cast<double>());
    const Array64& deepest = fwd.pyramid.back().data.value();
    total += mean_off_diagonal(similarity_matrix(deepest));
  }
  return total / static_cast<double>(data.size());
}

}  // namespace dytad
