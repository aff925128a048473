#pragma once

#include <cstdint>
#include <vector>

#include "ellitrack/assign.hpp"
#include "ellitrack/features.hpp"
#include "ellitrack/forest.hpp"
#include "ellitrack/synth.hpp"

namespace ellitrack {

/// Observations built from ground truth: visible objects with their true masks.
struct TruthObservations {
  ObservationSequence frames;
  std::vector<std::vector<int>> ids;  ///< ids[t][j] is the truth id of frames[t][j]
};

TruthObservations observations_from_truth(const Scene& scene, const FeatureParams& params = {}, int threads = 1);

/// Removes each object for `length` consecutive frames, starting at any
/// frame with probability `rate`. Deterministic in `seed`.
void inject_dropouts(TruthObservations& obs, double rate, int length, std::uint64_t seed);

struct SampleParams {
  int positives = 500;
  int negatives = 500;
  int max_gap = 5;      ///< frame gaps 1..max_gap are sampled, half of them at 1
  double gate = 60.0;   ///< negatives lie within gate * gap of the anchor
  double hard_fraction = 0.5;  ///< share of negatives taken as the nearest other object
  std::uint64_t seed = 1;
};

/// Same-object (positive) and different-object (negative) pairs. The
/// centre distance of a pair spanning g frames is divided by g, as in linking.
std::vector<TrainingSample> samples_from_truth(const TruthObservations& obs, const SampleParams& params);

}  // namespace ellitrack
