#include "ellitrack_cli/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ellitrack/error.hpp"

namespace ellitrack::cli {

namespace pt = boost::property_tree;

namespace {

using Setter = std::function<void(const std::string&)>;

template <typename T>
Setter bind(T& field) {
  return [&field](const std::string& text) {
    std::istringstream in(text);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) throw std::invalid_argument("cannot parse '" + text + "'");
    field = value;
  };
}

Setter bind_bool(bool& field) {
  return [&field](const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") {
      field = true;
    } else if (text == "false" || text == "0" || text == "no") {
      field = false;
    } else {
      throw std::invalid_argument("expected true or false, got '" + text + "'");
    }
  };
}

Setter bind_path(std::filesystem::path& field) {
  return [&field](const std::string& text) { field = text; };
}

std::map<std::string, std::map<std::string, Setter>> schema(PipelineConfig& c) {
  std::map<std::string, std::map<std::string, Setter>> s;
  auto& sc = s["scene"];
  sc["width"] = bind(c.scene.width);
  sc["height"] = bind(c.scene.height);
  sc["n_objects"] = bind(c.scene.n_objects);
  sc["frames"] = bind(c.scene.frames);
  sc["size_a"] = bind(c.scene.size_a);
  sc["size_b"] = bind(c.scene.size_b);
  sc["size_jitter"] = bind(c.scene.size_jitter);
  sc["speed_mean"] = bind(c.scene.speed_mean);
  sc["speed_jitter"] = bind(c.scene.speed_jitter);
  sc["turn_sigma"] = bind(c.scene.turn_sigma);
  sc["occlusion_bias"] = bind(c.scene.occlusion_bias);
  sc["texture"] = [&c](const std::string& v) { c.scene.texture = parse_texture(v); };
  sc["noise_sigma"] = bind(c.scene.noise_sigma);
  sc["seed"] = bind(c.scene.seed);
  sc["background"] = bind(c.scene.background);
  sc["foreground"] = bind(c.scene.foreground);
  sc["profile_gain"] = bind(c.scene.profile_gain);
  sc["profile_k"] = bind(c.scene.profile_k);
  sc["min_separation"] = bind(c.scene.min_separation);

  auto& d = s["detector"];
  d["nominal_a"] = bind(c.detector.nominal_a);
  d["nominal_b"] = bind(c.detector.nominal_b);
  d["size_range"] = bind(c.detector.size_range);
  d["k"] = bind(c.detector.k);
  d["lambda0"] = bind(c.detector.lambda0);
  d["tau"] = bind(c.detector.tau);
  d["iterations"] = bind(c.detector.iterations);
  d["n_orientations"] = bind(c.detector.n_orientations);
  d["scan_stride"] = bind(c.detector.scan_stride);
  d["nms_iou"] = bind(c.detector.nms_iou);
  d["processed_overlap"] = bind(c.detector.processed_overlap);
  d["spectrum_cache_mb"] = bind(c.detector.spectrum_cache_mb);

  auto& g = s["segmenter"];
  g["method"] = bind(c.segmentation);
  g["dt"] = bind(c.segmenter.dt);
  g["max_iters"] = bind(c.segmenter.max_iters);
  g["reinit_every"] = bind(c.segmenter.reinit_every);
  g["reinit_substeps"] = bind(c.segmenter.reinit_substeps);
  g["rel_tol"] = bind(c.segmenter.rel_tol);
  g["epsilon"] = bind(c.segmenter.epsilon);
  g["lambda1"] = bind(c.segmenter.lambda1);
  g["lambda2"] = bind(c.segmenter.lambda2);
  g["lambda3"] = bind(c.segmenter.lambda3);
  g["preconditioned"] = bind_bool(c.segmenter.preconditioned);

  auto& f = s["features"];
  f["rays"] = bind(c.features.rays);
  f["bins"] = bind(c.features.bins);

  auto& r = s["forest"];
  r["n_trees"] = bind(c.forest.n_trees);
  r["seed"] = bind(c.forest.seed);
  r["negatives_per_positive"] = bind(c.forest.negatives_per_positive);

  auto& a = s["assign"];
  a["gate_radius"] = bind(c.assign.gate_radius);
  a["slack_cost"] = bind(c.assign.slack_cost);
  a["max_gap"] = bind(c.assign.max_gap);
  a["gate_radius_per_frame"] = bind(c.assign.gate_radius_per_frame);
  a["link"] = bind_bool(c.link);
  a["matcher"] = [&c](const std::string& v) {
    if (v == "lap") {
      c.assign.matcher = Matcher::lap;
    } else if (v == "greedy") {
      c.assign.matcher = Matcher::greedy;
    } else {
      throw std::invalid_argument("expected lap or greedy, got '" + v + "'");
    }
  };

  s["metrics"]["match_threshold"] = bind(c.match_threshold);

  auto& p = s["paths"];
  p["frames"] = bind_path(c.paths.frames);
  p["truth"] = bind_path(c.paths.truth);
  p["detections"] = bind_path(c.paths.detections);
  p["positives"] = bind_path(c.paths.positives);
  p["forest"] = bind_path(c.paths.forest);
  p["trajectories"] = bind_path(c.paths.trajectories);
  p["report"] = bind_path(c.paths.report);
  p["report_frames"] = bind_path(c.paths.report_frames);
  p["render"] = bind_path(c.paths.render);
  return s;
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string file = path.string();
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(file, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(file + ": " + e.message() + (e.line() ? " (line " + std::to_string(e.line()) + ")" : ""));
  }
  PipelineConfig config;
  const auto keys = schema(config);
  for (const auto& [section, entries] : tree) {
    const auto sec = keys.find(section);
    if (sec == keys.end()) {
      throw ConfigError(file + ": unknown section [" + section + "]");
    }
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError(file + ": " + section + ": key outside of any section");
    }
    for (const auto& [key, value] : entries) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError(file + ": " + section + "." + key + ": unknown key");
      try {
        setter->second(value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(file + ": " + e.what());
      } catch (const std::exception& e) {
        throw ConfigError(file + ": " + section + "." + key + ": " + e.what());
      }
    }
  }
  try {
    validate(config);
  } catch (const ConfigError& e) {
    throw ConfigError(file + ": " + e.what());
  }
  return config;
}

std::vector<std::string> validate(const PipelineConfig& c) {
  c.scene.validate();
  std::vector<std::string> warnings = c.detector.validate();
  const SegmenterParams& g = c.segmenter;
  if (c.segmentation != "vm-acm" && c.segmentation != "ellipse") {
    throw ConfigError("segmenter.method: expected vm-acm or ellipse");
  }
  if (!(g.dt > 0.0)) throw ConfigError("segmenter.dt: must be positive");
  if (g.max_iters < 1) throw ConfigError("segmenter.max_iters: must be >= 1");
  if (g.reinit_every < 1) throw ConfigError("segmenter.reinit_every: must be >= 1");
  if (g.reinit_substeps < 1) throw ConfigError("segmenter.reinit_substeps: must be >= 1");
  if (!(g.rel_tol >= 0.0)) throw ConfigError("segmenter.rel_tol: must be >= 0");
  if (!(g.epsilon > 0.0)) throw ConfigError("segmenter.epsilon: must be positive");
  if (!(g.lambda1 > 0.0)) throw ConfigError("segmenter.lambda1: must be positive");
  if (!(g.lambda2 > 0.0)) throw ConfigError("segmenter.lambda2: must be positive");
  if (!(g.lambda3 >= 0.0)) throw ConfigError("segmenter.lambda3: must be >= 0");
  if (c.features.rays < 8) throw ConfigError("features.rays: must be >= 8");
  if (c.features.bins < 2) throw ConfigError("features.bins: must be >= 2");
  if (c.forest.n_trees < 1) throw ConfigError("forest.n_trees: must be >= 1");
  if (c.forest.negatives_per_positive < 1) throw ConfigError("forest.negatives_per_positive: must be >= 1");
  if (!(c.assign.gate_radius > 0.0)) throw ConfigError("assign.gate_radius: must be positive");
  if (!(c.assign.slack_cost > 0.0)) throw ConfigError("assign.slack_cost: must be positive");
  if (c.assign.max_gap < 1) throw ConfigError("assign.max_gap: must be >= 1");
  if (!(c.assign.gate_radius_per_frame > 0.0)) throw ConfigError("assign.gate_radius_per_frame: must be positive");
  if (!(c.match_threshold > 0.0)) throw ConfigError("metrics.match_threshold: must be positive");
  return warnings;
}

}  // namespace ellitrack::cli
