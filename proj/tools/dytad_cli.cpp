// Command-line front end: dataset synthesis, training, inference,
// evaluation, gradient checking and diagnostic dumps.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dytad/config.hpp"
#include "dytad/data.hpp"
#include "dytad/gradsuite.hpp"
#include "dytad/model.hpp"
#include "dytad/train.hpp"

namespace {

using dytad::Array64;
using json = nlohmann::ordered_json;

// Annotations file + directory of feature containers -> in-memory split.
dytad::Dataset load_split(const std::string& annotations, const std::string& features_dir) {
  dytad::Dataset videos;
  dytad::read_annotations(annotations, videos);
  for (auto& v : videos) v.features = dytad::read_feature_file(features_dir + "/" + v.video_id + ".dft");
  return videos;
}

// Checkpointed model with the EMA shadow swapped in when present (the
// averaged parameters are the ones meant for evaluation).
dytad::Model load_model_for_eval(const std::string& checkpoint) {
  dytad::Model model;
  dytad::Ema ema;
  dytad::load_checkpoint(checkpoint, model, ema);
  if (!ema.shadow().empty()) ema.swap(model);
  return model;
}

json array_json(const Array64& a) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(row);
  }
  return rows;
}

int cmd_synth(const std::string& config, uint64_t seed, bool seed_set, const std::string& out) {
  dytad::SynthConfig cfg;
  if (!config.empty()) cfg = dytad::run_config_from_file(config).synth;
  if (seed_set) cfg.seed = seed;
  auto [train_split, test_split] = dytad::synth_dataset(cfg);
  dytad::save_dataset(out + "/train", train_split);
  dytad::save_dataset(out + "/test", test_split);
  std::printf("synth: wrote %zu train / %zu test videos under %s\n", train_split.size(),
              test_split.size(), out.c_str());
  return 0;
}

int cmd_train(const std::string& config, uint64_t seed, bool seed_set,
              const std::string& annotations, const std::string& features,
              const std::string& out) {
  dytad::RunConfig run;
  if (!config.empty()) run = dytad::run_config_from_file(config);
  if (seed_set) run.train.seed = seed;
  dytad::Dataset data = load_split(annotations, features);
  DYTAD_REQUIRE(!data.empty(), "train: empty dataset");
  run.model.c_feat = static_cast<int>(data.front().features.rows());
  std::filesystem::create_directories(out);

  dytad::Rng rng(run.train.seed);
  dytad::Model model(run.model, rng);
  dytad::Ema ema(model, run.train.ema_decay);
  dytad::TrainResult result = dytad::train(model, ema, data, run.train, out);
  for (const auto& e : result.log) {
    if (e.train_map >= 0.0)
      std::printf("epoch %3d  lr %.6f  loss %.6f  train mAP@0.5 %.4f\n", e.epoch, e.lr, e.loss,
                  e.train_map);
    else
      std::printf("epoch %3d  lr %.6f  loss %.6f\n", e.epoch, e.lr, e.loss);
  }

  dytad::save_checkpoint(out + "/checkpoint.json", model, ema);
  json log = json::array();
  for (const auto& e : result.log)
    log.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss}, {"train_map", e.train_map}});
  std::ofstream log_out(out + "/train_log.json");
  log_out << log.dump(2) << "\n";
  std::printf("train: %d epochs, checkpoint at %s/checkpoint.json\n", result.epochs_run,
              out.c_str());
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& annotations,
              const std::string& features, const std::string& out) {
  dytad::Model model = load_model_for_eval(checkpoint);
  dytad::Dataset data = load_split(annotations, features);
  std::vector<dytad::Detection> dets = dytad::infer_dataset(model, data);
  dytad::write_detections(out, dets);
  std::printf("infer: %zu detections over %zu videos -> %s\n", dets.size(), data.size(),
              out.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& detections,
             const std::string& annotations, const std::string& features,
             const std::string& out) {
  dytad::Dataset data;
  dytad::read_annotations(annotations, data);
  std::vector<dytad::Detection> dets;
  if (!checkpoint.empty()) {
    dytad::Model model = load_model_for_eval(checkpoint);
    dets = dytad::infer_dataset(model, load_split(annotations, features));
  } else {
    DYTAD_REQUIRE(!detections.empty(), "eval: needs --detections or --checkpoint");
    dets = dytad::read_detections(detections);
  }
  dytad::EvalReport report =
      dytad::map_report(dets, dytad::gt_by_video(data), dytad::default_tiou_grid());
  std::string text = dytad::report_to_json(report);
  if (!out.empty()) {
    std::ofstream o(out);
    o << text << "\n";
  }
  std::printf("%s\n", text.c_str());
  return 0;
}

int cmd_gradcheck(uint64_t seed) {
  dytad::GradSuiteResult suite = dytad::run_grad_suite(seed);
  for (const auto& r : suite.reports)
    std::printf("%-12s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                r.pass ? "ok" : "FAIL");
  return suite.all_pass() ? 0 : 1;
}

int cmd_dump(const std::string& checkpoint, const std::string& annotations,
             const std::string& features, const std::string& out) {
  dytad::Model model = load_model_for_eval(checkpoint);
  dytad::Dataset data = load_split(annotations, features);
  json videos = json::array();
  for (const auto& v : data) {
    dytad::AttSink<double> cls_sink, reg_sink;
    dytad::ForwardResult fwd = model.forward(v.features.cast<double>(), &cls_sink, &reg_sink);
    json entry;
    entry["video_id"] = v.video_id;
    json sims = json::array();
    for (const auto& level : fwd.pyramid)
      sims.push_back({{"level", level.level},
                      {"stride", level.stride},
                      {"matrix", array_json(dytad::similarity_matrix(level.data.value()))}});
    entry["similarity"] = sims;
    json att = json::array();
    auto emit = [&](const char* trunk, const dytad::AttSink<double>& sink) {
      for (const auto& t : sink)
        att.push_back({{"trunk", trunk},
                       {"depth", t.depth},
                       {"level", t.level},
                       {"path", t.path},
                       {"attention", array_json(t.attention)}});
    };
    emit("cls", cls_sink);
    emit("reg", reg_sink);
    entry["attention"] = att;
    videos.push_back(entry);
  }
  std::ofstream o(out);
  DYTAD_REQUIRE(o.good(), "dump-diagnostics: cannot open " + out);
  o << json{{"videos", videos}}.dump(2) << "\n";
  std::printf("dump-diagnostics: wrote %zu videos -> %s\n", data.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal action detection on pre-extracted feature sequences"};
  app.require_subcommand(1);

  std::string config, annotations, features, checkpoint, detections, out;
  uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "run configuration (JSON)");
    cmd->add_option("--seed", seed, "seed override");
  };

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  add_common(synth);
  synth->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a detector");
  add_common(train);
  train->add_option("--annotations", annotations, "annotations JSON")->required();
  train->add_option("--features", features, "feature directory")->required();
  train->add_option("--out", out, "output directory for checkpoint and log")->required();

  auto* infer = app.add_subcommand("infer", "run a checkpoint over a split");
  infer->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  infer->add_option("--annotations", annotations, "annotations JSON")->required();
  infer->add_option("--features", features, "feature directory")->required();
  infer->add_option("--out", out, "detections JSON output")->required();

  auto* eval = app.add_subcommand("eval", "score detections against ground truth");
  eval->add_option("--checkpoint", checkpoint, "checkpoint JSON (runs inference)");
  eval->add_option("--detections", detections, "precomputed detections JSON");
  eval->add_option("--annotations", annotations, "annotations JSON")->required();
  eval->add_option("--features", features, "feature directory (with --checkpoint)");
  eval->add_option("--out", out, "report JSON output");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seed", seed, "suite seed");

  auto* dump = app.add_subcommand("dump-diagnostics", "attention and similarity dumps");
  dump->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  dump->add_option("--annotations", annotations, "annotations JSON")->required();
  dump->add_option("--features", features, "feature directory")->required();
  dump->add_option("--out", out, "diagnostics JSON output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(config, seed, synth->count("--seed") > 0, out);
    if (train->parsed())
      return cmd_train(config, seed, train->count("--seed") > 0, annotations, features, out);
    if (infer->parsed()) return cmd_infer(checkpoint, annotations, features, out);
    if (eval->parsed()) return cmd_eval(checkpoint, detections, annotations, features, out);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck->count("--seed") > 0 ? seed : 42);
    if (dump->parsed()) return cmd_dump(checkpoint, annotations, features, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
