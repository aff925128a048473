#include "ellitrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ellitrack/error.hpp"
#include "ellitrack/parallel.hpp"

namespace ellitrack {

TruthObservations observations_from_truth(const Scene& scene, const FeatureParams& params, int threads) {
  const std::size_t n = scene.truth.frames.size();
  if (scene.frames.size() != n) throw ContractError("observations_from_truth: frame count mismatch");
  TruthObservations out;
  out.frames.resize(n);
  out.ids.resize(n);
  parallel_for(n, threads, [&](std::size_t t) {
    for (const ObjectTruth& o : scene.truth.frames[t].objects) {
      if (!o.visible) continue;
      const auto mask = make_segment_mask(o.mask);
      if (!mask) continue;
      Detection d;
      d.center = o.center;
      d.half_extents = o.half_extents;
      d.orientation = o.orientation;
      d.fit = 1.0;
      d.frame = static_cast<int>(t);
      out.frames[t].push_back(describe(scene.frames[t], d, *mask, params));
      out.ids[t].push_back(o.id);
    }
  });
  return out;
}

void inject_dropouts(TruthObservations& obs, double rate, int length, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0 || length < 1) throw ContractError("inject_dropouts: invalid rate or length");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution start(rate);
  int max_id = -1;
  for (const auto& ids : obs.ids) {
    for (int id : ids) max_id = std::max(max_id, id);
  }
  const int frames = static_cast<int>(obs.frames.size());
  // dropped[t][id]: object withheld at frame t
  std::vector<std::vector<char>> dropped(frames, std::vector<char>(max_id + 1, 0));
  for (int id = 0; id <= max_id; ++id) {
    for (int t = 1; t < frames; ++t) {
      if (dropped[t][id] || !start(rng)) continue;
      for (int k = t; k < std::min(frames, t + length); ++k) dropped[k][id] = 1;
      t += length;  // keep at least one frame between dropouts
    }
  }
  for (int t = 0; t < frames; ++t) {
    std::vector<ObjectDescriptor> keep;
    std::vector<int> keep_ids;
    for (std::size_t j = 0; j < obs.frames[t].size(); ++j) {
      if (dropped[t][obs.ids[t][j]]) continue;
      keep.push_back(std::move(obs.frames[t][j]));
      keep_ids.push_back(obs.ids[t][j]);
    }
    obs.frames[t] = std::move(keep);
    obs.ids[t] = std::move(keep_ids);
  }
}

namespace {

FeatureVector gap_features(const ObjectDescriptor& a, const ObjectDescriptor& b, int gap) {
  FeatureVector fv = pair_features(a, b);
  fv.center_dist /= gap;
  return fv;
}

double centroid_distance(const ObjectDescriptor& a, const ObjectDescriptor& b) {
  return std::hypot(a.mask.centroid.x - b.mask.centroid.x, a.mask.centroid.y - b.mask.centroid.y);
}

}  // namespace

std::vector<TrainingSample> samples_from_truth(const TruthObservations& obs, const SampleParams& params) {
  if (params.positives < 1 || params.negatives < 1 || params.max_gap < 1 || !(params.gate > 0.0)) {
    throw ContractError("samples_from_truth: invalid parameters");
  }
  const int frames = static_cast<int>(obs.frames.size());
  if (frames < 2) throw ContractError("samples_from_truth: at least 2 frames required");
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<int> pick_frame(0, frames - 2);
  std::uniform_int_distribution<int> pick_gap(2, std::max(2, params.max_gap));
  std::bernoulli_distribution unit_gap(params.max_gap == 1 ? 1.0 : 0.5);
  std::bernoulli_distribution hard(params.hard_fraction);
  const auto draw_gap = [&](int t) {
    const int g = unit_gap(rng) ? 1 : pick_gap(rng);
    return std::min(g, frames - 1 - t);
  };

  std::vector<TrainingSample> out;
  int pos = 0, neg = 0;
  const long budget = 100L * (params.positives + params.negatives) + 10000;
  for (long attempt = 0; attempt < budget && (pos < params.positives || neg < params.negatives); ++attempt) {
    const int t = pick_frame(rng);
    if (obs.frames[t].empty()) continue;
    const int g = draw_gap(t);
    const auto& here = obs.frames[t];
    const auto& there = obs.frames[t + g];
    if (there.empty()) continue;
    const int i = std::uniform_int_distribution<int>(0, static_cast<int>(here.size()) - 1)(rng);
    const int id = obs.ids[t][i];
    const bool want_positive = pos < params.positives && (pos <= neg || neg >= params.negatives);
    if (want_positive) {
      for (std::size_t j = 0; j < there.size(); ++j) {
        if (obs.ids[t + g][j] == id) {
          out.push_back({gap_features(here[i], there[j], g), true});
          ++pos;
          break;
        }
      }
      continue;
    }
    std::vector<int> candidates;
    for (std::size_t j = 0; j < there.size(); ++j) {
      if (obs.ids[t + g][j] != id && centroid_distance(here[i], there[j]) <= params.gate * g) {
        candidates.push_back(static_cast<int>(j));
      }
    }
    if (candidates.empty()) continue;
    int j = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    if (hard(rng)) {
      j = *std::min_element(candidates.begin(), candidates.end(), [&](int l, int r) {
        return centroid_distance(here[i], there[l]) < centroid_distance(here[i], there[r]);
      });
    }
    out.push_back({gap_features(here[i], there[j], g), false});
    ++neg;
  }
  if (pos == 0 || neg == 0) throw DomainError("samples_from_truth: scene yields no positive or no negative pairs");
  return out;
}

}  // namespace ellitrack
