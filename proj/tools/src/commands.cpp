#include "ellitrack_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ellitrack/detection_io.hpp"
#include "ellitrack/error.hpp"
#include "ellitrack/forest.hpp"
#include "ellitrack/metrics.hpp"
#include "ellitrack/synth.hpp"
#include "ellitrack_cli/render.hpp"

namespace ellitrack::cli {

namespace fs = std::filesystem;

PipelineConfig resolve_config(const CommandOptions& options) {
  PipelineConfig config = options.config ? load_config(*options.config) : PipelineConfig{};
  if (options.seed) {
    config.scene.seed = *options.seed;
    config.forest.seed = *options.seed;
  }
  if (options.threads < 1) throw ConfigError("--threads: must be >= 1");
  config.detector.threads = options.threads;
  config.assign.threads = options.threads;
  validate(config);
  return config;
}

fs::path artifact(const CommandOptions& options, const fs::path& path) {
  return path.is_absolute() ? path : options.out / path;
}

fs::path frame_path(const fs::path& dir, int frame) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%04d.pgm", frame);
  return dir / name;
}

std::vector<GrayImage> load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": frame directory not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    const std::string name = p.filename().string();
    if (name.rfind("frame_", 0) == 0 && (p.extension() == ".pgm" || p.extension() == ".png")) files.push_back(p);
  }
  if (files.empty()) throw IoError(dir.string() + ": no frame_*.pgm or frame_*.png files");
  std::sort(files.begin(), files.end());
  std::vector<GrayImage> frames;
  for (const fs::path& p : files) {
    frames.push_back(read_image(p));
    if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height()) {
      throw IoError(p.string() + ": frame size differs from " + files.front().string());
    }
  }
  return frames;
}

namespace {

void print_warnings(const PipelineConfig& config, std::ostream& log) {
  for (const std::string& w : validate(config)) log << "warning: " << w << '\n';
}

Segmenter make_segmenter(const PipelineConfig& config) {
  if (config.segmentation == "ellipse") return ellipse_segmenter();
  return vm_acm_segmenter(config.detector.k, config.segmenter);
}

/// Detections grouped by frame, each group in file order.
std::vector<std::vector<DetectionRecord>> by_frame(std::vector<DetectionRecord> records, int frames,
                                                   const fs::path& source) {
  std::vector<std::vector<DetectionRecord>> out(frames);
  for (DetectionRecord& r : records) {
    if (r.detection.frame < 0 || r.detection.frame >= frames) {
      throw IoError(source.string() + ": detection frame " + std::to_string(r.detection.frame) +
                    " outside the " + std::to_string(frames) + " frames on disk");
    }
    out[r.detection.frame].push_back(std::move(r));
  }
  return out;
}

/// Descriptors of every detection with a mask; index[t][k] is the position
/// of descriptor k of frame t within that frame's detection records.
struct Observations {
  ObservationSequence frames;
  std::vector<std::vector<int>> index;
};

Observations describe_all(const std::vector<GrayImage>& images,
                          const std::vector<std::vector<DetectionRecord>>& records, const FeatureParams& params) {
  Observations out;
  out.frames.resize(images.size());
  out.index.resize(images.size());
  for (std::size_t t = 0; t < images.size(); ++t) {
    for (std::size_t k = 0; k < records[t].size(); ++k) {
      const DetectionRecord& r = records[t][k];
      if (!r.mask) continue;
      out.frames[t].push_back(describe(images[t], r.detection, *r.mask, params));
      out.index[t].push_back(static_cast<int>(k));
    }
  }
  return out;
}

struct PositivePair {
  int frame = 0;
  int index = 0;
  int next_index = 0;
};

std::vector<PositivePair> read_positives(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "frame,index,next_frame,next_index") {
    throw IoError(path.string() + ": expected header 'frame,index,next_frame,next_index'");
  }
  std::vector<PositivePair> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    int f = 0, i = 0, nf = 0, ni = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream ss(line);
    if (!(ss >> f >> c1 >> i >> c2 >> nf >> c3 >> ni) || c1 != ',' || c2 != ',' || c3 != ',') {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (nf != f + 1) throw IoError(path.string() + ":" + std::to_string(lineno) + ": next_frame must be frame + 1");
    out.push_back({f, i, ni});
  }
  return out;
}

void write_positives(const fs::path& path, const std::vector<PositivePair>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,index,next_frame,next_index\n";
  for (const PositivePair& p : pairs) out << p.frame << ',' << p.index << ',' << p.frame + 1 << ',' << p.next_index << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

/// Truth id of each detection (-1 when unmatched): minimum-distance matching
/// of detection centres to visible truth centres within `threshold`.
std::vector<int> label_detections(const std::vector<DetectionRecord>& dets, const FrameTruth& truth,
                                  double threshold) {
  std::vector<const ObjectTruth*> objects;
  for (const ObjectTruth& o : truth.objects) {
    if (o.visible) objects.push_back(&o);
  }
  std::vector<int> labels(dets.size(), -1);
  if (dets.empty() || objects.empty()) return labels;
  CostMatrix costs(static_cast<int>(dets.size()), static_cast<int>(objects.size()));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = 0; j < objects.size(); ++j) {
      const double d = std::hypot(dets[i].detection.center.x - objects[j]->center.x,
                                  dets[i].detection.center.y - objects[j]->center.y);
      if (d <= threshold) costs.at(static_cast<int>(i), static_cast<int>(j)) = d;
    }
  }
  const Assignment a = solve_lap_with_slack(costs, 2.0 * threshold * static_cast<double>(dets.size() + 1) + 1.0);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (a.row_to_col[i] >= 0) labels[i] = objects[a.row_to_col[i]]->id;
  }
  return labels;
}

double centroid_distance(const ObjectDescriptor& a, const ObjectDescriptor& b) {
  return std::hypot(a.mask.centroid.x - b.mask.centroid.x, a.mask.centroid.y - b.mask.centroid.y);
}

GroundTruth load_checked_truth(const fs::path& path, const std::vector<GrayImage>& frames) {
  GroundTruth truth = load_truth(path);
  if (truth.width != frames.front().width() || truth.height != frames.front().height()) {
    throw IoError(path.string() + ": truth is " + std::to_string(truth.width) + "x" + std::to_string(truth.height) +
                  " but frames are " + std::to_string(frames.front().width()) + "x" +
                  std::to_string(frames.front().height()));
  }
  if (truth.frames.size() != frames.size()) {
    throw IoError(path.string() + ": truth has " + std::to_string(truth.frames.size()) + " frames but " +
                  std::to_string(frames.size()) + " frames are on disk");
  }
  return truth;
}

}  // namespace

int cmd_gen(const CommandOptions& options, std::ostream& log) {
  const PipelineConfig config = resolve_config(options);
  const Scene scene = generate(config.scene, options.threads);
  const fs::path dir = artifact(options, config.paths.frames);
  fs::create_directories(dir);
  for (std::size_t t = 0; t < scene.frames.size(); ++t) write_pgm(frame_path(dir, static_cast<int>(t)), scene.frames[t]);
  const fs::path truth = artifact(options, config.paths.truth);
  save_truth(truth, scene.truth);
  log << "gen: " << scene.frames.size() << " frames of " << config.scene.width << "x" << config.scene.height
      << " with " << config.scene.n_objects << " objects -> " << dir.string() << ", " << truth.string() << '\n';
  return 0;
}

int cmd_detect(const CommandOptions& options, std::ostream& log) {
  const PipelineConfig config = resolve_config(options);
  print_warnings(config, log);
  const std::vector<GrayImage> frames = load_frames(artifact(options, config.paths.frames));
  const Segmenter segmenter = make_segmenter(config);
  ScanPlan plan(config.detector, frames.front().width(), frames.front().height());
  std::vector<DetectionRecord> records;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (SegmentedDetection& d : detect_iterative(frames[t], config.detector, segmenter, static_cast<int>(t), &plan)) {
      records.push_back({d.detection, std::move(d.mask)});
    }
  }
  const fs::path out = artifact(options, config.paths.detections);
  save_detections(out, records);
  log << "detect: " << records.size() << " detections in " << frames.size() << " frames -> " << out.string() << '\n';
  return 0;
}

int cmd_train(const CommandOptions& options, std::ostream& log) {
  const PipelineConfig config = resolve_config(options);
  const std::vector<GrayImage> frames = load_frames(artifact(options, config.paths.frames));
  const fs::path det_path = artifact(options, config.paths.detections);
  const auto records = by_frame(load_detections(det_path), static_cast<int>(frames.size()), det_path);
  const Observations obs = describe_all(frames, records, config.features);
  const fs::path pos_path = artifact(options, config.paths.positives);

  std::vector<PositivePair> positives;
  if (options.from_truth) {
    const GroundTruth truth = load_checked_truth(artifact(options, config.paths.truth), frames);
    std::vector<std::vector<int>> labels(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      labels[t] = label_detections(records[t], truth.frames[t], config.match_threshold);
    }
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
      for (std::size_t i = 0; i < labels[t].size(); ++i) {
        if (labels[t][i] < 0) continue;
        for (std::size_t j = 0; j < labels[t + 1].size(); ++j) {
          if (labels[t + 1][j] == labels[t][i]) positives.push_back({static_cast<int>(t), static_cast<int>(i), static_cast<int>(j)});
        }
      }
    }
    write_positives(pos_path, positives);
  } else {
    positives = read_positives(pos_path);
  }

  // detection index -> descriptor position
  std::vector<std::map<int, int>> slot(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t k = 0; k < obs.index[t].size(); ++k) slot[t][obs.index[t][k]] = static_cast<int>(k);
  }
  const auto lookup = [&](int frame, int index, int row) {
    const auto it = slot[frame].find(index);
    if (it == slot[frame].end()) {
      throw IoError(pos_path.string() + ": row " + std::to_string(row) + " names detection " + std::to_string(index) +
                    " of frame " + std::to_string(frame) + ", which has no mask in " + det_path.string());
    }
    return it->second;
  };

  std::vector<TrainingSample> samples;
  int negatives = 0;
  for (std::size_t p = 0; p < positives.size(); ++p) {
    const PositivePair& pair = positives[p];
    if (pair.frame < 0 || pair.frame + 1 >= static_cast<int>(frames.size())) {
      throw IoError(pos_path.string() + ": row " + std::to_string(p + 2) + " names frame " +
                    std::to_string(pair.frame) + " without a successor");
    }
    const int a = lookup(pair.frame, pair.index, static_cast<int>(p) + 2);
    const int b = lookup(pair.frame + 1, pair.next_index, static_cast<int>(p) + 2);
    const auto& here = obs.frames[pair.frame];
    const auto& next = obs.frames[pair.frame + 1];
    samples.push_back({pair_features(here[a], next[b]), true});
    // hard negatives: nearest other detections of the next frame inside the gate
    std::vector<std::pair<double, int>> near;
    for (std::size_t k = 0; k < next.size(); ++k) {
      if (static_cast<int>(k) == b) continue;
      const double d = centroid_distance(here[a], next[k]);
      if (d <= config.assign.gate_radius) near.emplace_back(d, static_cast<int>(k));
    }
    std::sort(near.begin(), near.end());
    const std::size_t take = std::min<std::size_t>(near.size(), config.forest.negatives_per_positive);
    for (std::size_t k = 0; k < take; ++k) {
      samples.push_back({pair_features(here[a], next[near[k].second]), false});
      ++negatives;
    }
  }
  if (positives.empty()) throw IoError(pos_path.string() + ": no positive pairs");
  if (negatives == 0) throw IoError(pos_path.string() + ": no negatives within assign.gate_radius of any positive");
  const Forest forest = train_forest(samples, config.forest.n_trees, config.forest.seed, options.threads);
  const fs::path out = artifact(options, config.paths.forest);
  save_forest(out, forest);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", forest.oob_accuracy);
  log << "train: " << positives.size() << " positive and " << negatives << " negative pairs, " << forest.n_trees()
      << " trees -> " << out.string() << '\n';
  log << "oob_accuracy " << buf << '\n';
  return 0;
}

int cmd_track(const CommandOptions& options, std::ostream& log) {
  const PipelineConfig config = resolve_config(options);
  const std::vector<GrayImage> frames = load_frames(artifact(options, config.paths.frames));
  const fs::path det_path = artifact(options, config.paths.detections);
  const auto records = by_frame(load_detections(det_path), static_cast<int>(frames.size()), det_path);
  const Observations obs = describe_all(frames, records, config.features);
  const Forest forest = load_forest(artifact(options, config.paths.forest));
  std::vector<Tracklet> tracks = track_frames(obs.frames, forest, config.assign);
  const std::size_t tracklets = tracks.size();
  if (config.link) {
    tracks = link_tracklets(tracks, obs.frames, forest, config.assign);
  } else {
    canonicalize(tracks);
  }
  const fs::path out = artifact(options, config.paths.trajectories);
  save_trajectories(out, tracks);
  log << "track: " << tracklets << " tracklets -> " << tracks.size() << " trajectories -> " << out.string() << '\n';
  return 0;
}

int cmd_eval(const CommandOptions& options, std::ostream& log) {
  const PipelineConfig config = resolve_config(options);
  const std::vector<GrayImage> frames = load_frames(artifact(options, config.paths.frames));
  const GroundTruth truth = load_checked_truth(artifact(options, config.paths.truth), frames);
  const auto tracks = load_trajectories(artifact(options, config.paths.trajectories));
  const MotReport mot = clear_mot(tracks_from_tracklets(tracks, static_cast<int>(frames.size())),
                                  tracks_from_truth(truth), config.match_threshold);

  std::optional<double> voc;
  const fs::path det_path = artifact(options, config.paths.detections);
  if (fs::exists(det_path)) {
    const auto records = by_frame(load_detections(det_path), static_cast<int>(frames.size()), det_path);
    double sum = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      std::vector<PixelMask> pred, gt;
      for (const DetectionRecord& r : records[t]) {
        if (r.mask) pred.push_back(r.mask->pixels);
      }
      for (const ObjectTruth& o : truth.frames[t].objects) gt.push_back(o.mask);
      sum += voc_score(pred, gt);
    }
    voc = sum / static_cast<double>(frames.size());
  }

  nlohmann::json doc = nlohmann::json::parse(mot_report_json(mot));
  doc["voc"] = voc ? nlohmann::json(*voc) : nlohmann::json(nullptr);
  const fs::path report = artifact(options, config.paths.report);
  {
    std::ofstream out(report);
    if (!out) throw IoError("cannot write " + report.string());
    out << doc.dump(2) << '\n';
  }
  const fs::path per_frame = artifact(options, config.paths.report_frames);
  {
    std::ofstream out(per_frame);
    if (!out) throw IoError("cannot write " + per_frame.string());
    out << mot_frames_csv(mot);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "MOTA %.4f  MOTP %.4f px (per match %.4f px)  mismatches %ld", mot.mota, mot.motp,
                mot.motp_matched, mot.total_mismatches());
  log << buf;
  if (voc) {
    std::snprintf(buf, sizeof(buf), "  VOC %.4f", *voc);
    log << buf;
  }
  log << '\n';
  return 0;
}

int cmd_render(const CommandOptions& options, std::ostream& log) {
  const PipelineConfig config = resolve_config(options);
  const std::vector<GrayImage> frames = load_frames(artifact(options, config.paths.frames));
  const auto tracks = load_trajectories(artifact(options, config.paths.trajectories));
  const fs::path out = artifact(options, config.paths.render);
  std::ofstream file(out);
  if (!file) throw IoError("cannot write " + out.string());
  file << render_svg(frames.back(), tracks);
  if (!file) throw IoError("failed writing " + out.string());
  log << "render: " << tracks.size() << " trajectories -> " << out.string() << '\n';
  return 0;
}

}  // namespace ellitrack::cli
