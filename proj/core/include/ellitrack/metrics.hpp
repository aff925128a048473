#pragma once

#include <span>
#include <string>
#include <vector>

#include "ellitrack/assign.hpp"
#include "ellitrack/raster.hpp"
#include "ellitrack/synth.hpp"

namespace ellitrack {

/// Pixelwise TP / (TP + FP + FN) between the union of `pred` and the union
/// of `truth`. Both unions empty gives 1.0.
double voc_score(std::span<const PixelMask> pred, std::span<const PixelMask> truth);

struct TrackPoint {
  int id = 0;
  Point2 center;
  bool ignored = false;  ///< truth only: may be matched, never charged or scored
};

/// frames[t] lists the objects present at frame t.
using FrameTracks = std::vector<std::vector<TrackPoint>>;

/// Every state, dummies included. `frames` < 0 sizes to the last state.
FrameTracks tracks_from_tracklets(const std::vector<Tracklet>& tracklets, int frames = -1);
/// Every object at every frame. With ignore_occluded, objects not flagged
/// visible are kept as ignored entries.
FrameTracks tracks_from_truth(const GroundTruth& truth, bool ignore_occluded = true);

struct MotReport {
  double mota = 1.0;
  double motp = 0.0;          ///< sum of match distances / sum of ground-truth objects
  double motp_matched = 0.0;  ///< sum of match distances / number of matches
  double match_threshold = 0.0;
  std::vector<int> misses;
  std::vector<int> false_positives;
  std::vector<int> mismatches;
  std::vector<int> ground_truth;
  std::vector<std::vector<double>> distances;  ///< per frame, one entry per match

  long total_misses() const;
  long total_false_positives() const;
  long total_mismatches() const;
  long total_ground_truth() const;
  long total_matches() const;
};

/// CLEAR-MOT with centre distances. Pairs from the previous frame are kept
/// while within `match_threshold`; the rest are matched by a maximum-size,
/// then minimum-distance assignment. A mismatch is counted when a truth
/// object is paired with a hypothesis other than its last partner.
/// Ignored truth entries take part in matching and identity bookkeeping,
/// but add no misses, mismatches, distances or ground-truth count, and the
/// hypotheses they absorb are not false positives.
MotReport clear_mot(const FrameTracks& hypotheses, const FrameTracks& truth, double match_threshold);

std::string mot_report_json(const MotReport& report);
/// One row per frame: frame,gt,misses,false_positives,mismatches,matches,distance_sum.
std::string mot_frames_csv(const MotReport& report);

}  // namespace ellitrack
