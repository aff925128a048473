#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ellitrack/detection.hpp"
#include "ellitrack/features.hpp"
#include "ellitrack/forest.hpp"
#include "ellitrack/segmenter.hpp"

namespace ellitrack {

/// Marks a pair that may never be assigned.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> costs;  ///< row-major; finite or kForbidden

  CostMatrix() = default;
  CostMatrix(int rows, int cols, double fill = kForbidden);
  CostMatrix(int rows, int cols, std::vector<double> values);

  double at(int r, int c) const { return costs[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return costs[static_cast<std::size_t>(r) * cols + c]; }
};

struct Assignment {
  std::vector<int> row_to_col;  ///< -1 = unassigned
  double total = 0.0;           ///< sum over assigned pairs
};

/// Minimum-cost matching that assigns every row when rows <= cols (every
/// column otherwise). Shortest augmenting paths with dual potentials;
/// forbidden entries never enter a path. Throws InfeasibleError when no
/// such matching avoids forbidden entries.
Assignment solve_lap(const CostMatrix& costs);

/// Minimum-cost partial matching where leaving a row or a column unmatched
/// costs slack / 2 each, so a pair is matched only when that beats slack.
/// Solved exactly on the (rows + cols) square augmentation.
Assignment solve_lap_with_slack(const CostMatrix& costs, double slack);

/// Row-by-row greedy choice of the cheapest free column below slack.
Assignment solve_greedy(const CostMatrix& costs, double slack);

struct TrackState {
  int frame = 0;
  Detection detection;
  std::optional<SegmentMask> mask;  ///< absent for dummies
  bool is_dummy = false;
  int observation = -1;  ///< index into the frame's observations, -1 for dummies
};

struct Tracklet {
  int id = 0;
  std::vector<TrackState> states;  ///< strictly increasing frames

  int first_frame() const { return states.front().frame; }
  int last_frame() const { return states.back().frame; }
};

enum class Matcher { lap, greedy };

struct TrackParams {
  double gate_radius = 60.0;
  double slack_cost = 0.5;
  int max_gap = 5;
  double gate_radius_per_frame = 60.0;
  Matcher matcher = Matcher::lap;
  int threads = 1;
};

/// Per-frame object descriptors; frames[t] holds the objects seen at frame t.
using ObservationSequence = std::vector<std::vector<ObjectDescriptor>>;

/// First stage: frame-to-frame assignment with cost 1 - votes, gated by
/// centre distance, chained into tracklets.
std::vector<Tracklet> track_frames(const ObservationSequence& frames, const Forest& forest, const TrackParams& params);

/// Second stage: links tracklet ends to later tracklet starts across gaps of
/// at most max_gap frames and fills the gaps with dummy states. The centre
/// distance feature of a candidate is divided by its frame gap.
std::vector<Tracklet> link_tracklets(const std::vector<Tracklet>& tracklets, const ObservationSequence& frames,
                                     const Forest& forest, const TrackParams& params);

/// Inserts linearly interpolated dummy states into internal frame gaps;
/// geometry is copied from the nearer real endpoint.
Tracklet fill_gaps(const Tracklet& tracklet);

/// Renumbers ids 0.. in (first frame, first centre) order.
void canonicalize(std::vector<Tracklet>& tracklets);

std::string trajectories_csv_header();
std::string trajectories_to_csv(const std::vector<Tracklet>& tracklets);
/// Reads the CSV written by trajectories_to_csv (states carry no masks).
std::vector<Tracklet> trajectories_from_csv(const std::string& text, const std::string& source = "<memory>");
void save_trajectories(const std::filesystem::path& path, const std::vector<Tracklet>& tracklets);
std::vector<Tracklet> load_trajectories(const std::filesystem::path& path);

}  // namespace ellitrack
