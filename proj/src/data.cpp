#include "dytad/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace dytad {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'T', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                                  static_cast<unsigned char>((v >> 8) & 0xff),
                                  static_cast<unsigned char>((v >> 16) & 0xff),
                                  static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
         (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  const uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void write_feature_file(const std::string& path, const Array32& features) {
  std::ofstream out(path, std::ios::binary);
  DYTAD_REQUIRE(out.good(), "cannot open feature file for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(features.rows()));
  put_u32(out, static_cast<uint32_t>(features.cols()));
  for (Eigen::Index c = 0; c < features.rows(); ++c)
    for (Eigen::Index t = 0; t < features.cols(); ++t) put_f32(out, features(c, t));
  DYTAD_REQUIRE(out.good(), "failed writing feature file: " + path);
}

Array32 read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  DYTAD_REQUIRE(in.good(), "cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  DYTAD_REQUIRE(in.good() && std::memcmp(magic, kMagic, 4) == 0,
                "bad feature file magic: " + path);
  DYTAD_REQUIRE(get_u32(in) == kVersion, "unsupported feature file version: " + path);
  const uint32_t c = get_u32(in), t = get_u32(in);
  DYTAD_REQUIRE(in.good() && c > 0 && t > 0, "bad feature file header: " + path);
  Array32 features(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
  for (uint32_t i = 0; i < c; ++i)
    for (uint32_t j = 0; j < t; ++j)
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = get_f32(in);
  DYTAD_REQUIRE(in.good(), "truncated feature file: " + path);
  return features;
}

namespace {

using nlohmann::json;

json annotations_to_json(const Dataset& videos) {
  json root = json::object();
  for (const auto& v : videos) {
    json anns = json::array();
    for (const auto& s : v.annotations)
      anns.push_back(json{{"segment", {s.t_start, s.t_end}}, {"label", s.label}});
    root[v.video_id] = json{{"duration_s", v.duration_s},
                            {"feature_stride_s", v.feature_stride_s},
                            {"annotations", anns}};
  }
  return root;
}

}  // namespace

void write_annotations(const std::string& path, const Dataset& videos) {
  std::ofstream out(path);
  DYTAD_REQUIRE(out.good(), "cannot open annotation file for writing: " + path);
  out << annotations_to_json(videos).dump(2) << "\n";
}

void read_annotations(const std::string& path, Dataset& videos) {
  std::ifstream in(path);
  DYTAD_REQUIRE(in.good(), "cannot open annotation file: " + path);
  json root = json::parse(in, nullptr, false);
  DYTAD_REQUIRE(root.is_object() && !root.is_discarded(), "bad annotation JSON: " + path);
  videos.clear();
  for (const auto& [vid, meta] : root.items()) {
    VideoSample v;
    v.video_id = vid;
    v.duration_s = meta.at("duration_s").get<double>();
    v.feature_stride_s = meta.at("feature_stride_s").get<double>();
    for (const auto& a : meta.at("annotations")) {
      Segment s;
      s.t_start = a.at("segment").at(0).get<double>();
      s.t_end = a.at("segment").at(1).get<double>();
      s.label = a.at("label").get<int>();
      DYTAD_REQUIRE(0.0 <= s.t_start && s.t_start < s.t_end && s.t_end <= v.duration_s,
                    "annotation outside video: " + vid);
      v.annotations.push_back(s);
    }
    videos.push_back(std::move(v));
  }
}

void write_detections(const std::string& path, const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const auto& d : dets)
    arr.push_back(json{{"video_id", d.video_id},
                       {"t_start", d.t_start},
                       {"t_end", d.t_end},
                       {"label", d.label},
                       {"score", d.score}});
  std::ofstream out(path);
  DYTAD_REQUIRE(out.good(), "cannot open detections file for writing: " + path);
  out << arr.dump(2) << "\n";
}

std::vector<Detection> read_detections(const std::string& path) {
  std::ifstream in(path);
  DYTAD_REQUIRE(in.good(), "cannot open detections file: " + path);
  json arr = json::parse(in, nullptr, false);
  DYTAD_REQUIRE(arr.is_array(), "bad detections JSON: " + path);
  std::vector<Detection> dets;
  for (const auto& j : arr) {
    Detection d;
    d.video_id = j.at("video_id").get<std::string>();
    d.t_start = j.at("t_start").get<double>();
    d.t_end = j.at("t_end").get<double>();
    d.label = j.at("label").get<int>();
    d.score = j.at("score").get<double>();
    dets.push_back(std::move(d));
  }
  return dets;
}

void save_dataset(const std::string& dir, const Dataset& videos) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  write_annotations((fs::path(dir) / "annotations.json").string(), videos);
  for (const auto& v : videos)
    write_feature_file((fs::path(dir) / "features" / (v.video_id + ".dft")).string(), v.features);
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset videos;
  read_annotations((fs::path(dir) / "annotations.json").string(), videos);
  for (auto& v : videos)
    v.features = read_feature_file((fs::path(dir) / "features" / (v.video_id + ".dft")).string());
  return videos;
}

namespace {

// Fixed per-class channel signature, independent of the dataset stream.
Array64 class_pattern(int c_feat, int label) {
  Rng rng(0x9E3779B97F4A7C15ull ^ static_cast<uint64_t>(label));
  Array64 p = rng.normal_array(c_feat, 1);
  const double norm = std::sqrt(p.square().sum());
  return p / (norm > 0.0 ? norm : 1.0);
}

constexpr double kPatternAmplitude = 2.0;

VideoSample synth_video(const SynthConfig& cfg, Rng& rng, int index,
                        const std::vector<Array64>& patterns) {
  VideoSample v;
  char name[16];
  std::snprintf(name, sizeof(name), "v%04d", index);
  v.video_id = name;
  v.duration_s = cfg.t * cfg.feature_stride_s;
  v.feature_stride_s = cfg.feature_stride_s;

  Array64 feats = rng.normal_array(cfg.c_feat, cfg.t, cfg.noise_level);
  const int num_instances = rng.uniform_int(1, 3);
  std::vector<std::pair<int, int>> spans;  // [start, end) grid
  for (int i = 0; i < num_instances; ++i) {
    const int dur = std::min(rng.uniform_int(8, 96), cfg.t);
    const int start = rng.uniform_int(0, cfg.t - dur);
    const int end = start + dur;
    bool overlaps = false;
    for (const auto& [s0, e0] : spans) overlaps |= start < e0 && s0 < end;
    if (overlaps) continue;  // drop colliding draws; instance count varies
    spans.emplace_back(start, end);
    const int label = rng.uniform_int(0, cfg.num_classes - 1);
    for (int t = start; t < end; ++t)
      feats.col(t) += kPatternAmplitude * patterns[static_cast<size_t>(label)].col(0);
    v.annotations.push_back(
        {start * cfg.feature_stride_s, end * cfg.feature_stride_s, label});
  }
  std::sort(v.annotations.begin(), v.annotations.end(),
            [](const Segment& a, const Segment& b) { return a.t_start < b.t_start; });
  v.features = feats.cast<float>();
  return v;
}

}  // namespace

std::pair<Dataset, Dataset> synth_dataset(const SynthConfig& cfg) {
  std::vector<Array64> patterns;
  for (int c = 0; c < cfg.num_classes; ++c) patterns.push_back(class_pattern(cfg.c_feat, c));
  Rng rng(cfg.seed);
  Dataset train, test;
  for (int i = 0; i < cfg.num_train; ++i) train.push_back(synth_video(cfg, rng, i, patterns));
  for (int i = 0; i < cfg.num_test; ++i)
    test.push_back(synth_video(cfg, rng, cfg.num_train + i, patterns));
  return {std::move(train), std::move(test)};
}

VideoSample random_crop(const VideoSample& v, int max_len, Rng& rng) {
  const int t = static_cast<int>(v.features.cols());
  if (t <= max_len) return v;
  const int start = rng.uniform_int(0, t - max_len);
  const double lo = start * v.feature_stride_s;
  const double hi = (start + max_len) * v.feature_stride_s;

  VideoSample out;
  out.video_id = v.video_id;
  out.features = v.features.middleCols(start, max_len);
  out.duration_s = max_len * v.feature_stride_s;
  out.feature_stride_s = v.feature_stride_s;
  for (const auto& s : v.annotations) {
    const double a = std::max(s.t_start, lo) - lo;
    const double b = std::min(s.t_end, hi) - lo;
    if (b > a) out.annotations.push_back({a, b, s.label});
  }
  return out;
}

GtMap gt_by_video(const Dataset& videos) {
  GtMap gts;
  for (const auto& v : videos) gts[v.video_id] = v.annotations;
  return gts;
}

}  // namespace dytad
