#include "ellitrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ellitrack/error.hpp"

namespace ellitrack {

double voc_score(std::span<const PixelMask> pred, std::span<const PixelMask> truth) {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool first = true;
  const auto extend = [&](const PixelMask& m) {
    if (m.width() == 0 || m.height() == 0) return;
    if (first) {
      x0 = m.x0(), y0 = m.y0(), x1 = m.x0() + m.width(), y1 = m.y0() + m.height();
      first = false;
    } else {
      x0 = std::min(x0, m.x0()), y0 = std::min(y0, m.y0());
      x1 = std::max(x1, m.x0() + m.width()), y1 = std::max(y1, m.y0() + m.height());
    }
  };
  for (const auto& m : pred) extend(m);
  for (const auto& m : truth) extend(m);
  if (first) return 1.0;
  const int w = x1 - x0;
  const int h = y1 - y0;
  // bit 0: predicted, bit 1: truth
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(w) * h, 0);
  const auto paint = [&](const PixelMask& m, std::uint8_t bit) {
    for (int ly = 0; ly < m.height(); ++ly) {
      for (int lx = 0; lx < m.width(); ++lx) {
        if (m.local(lx, ly)) grid[static_cast<std::size_t>(m.y0() + ly - y0) * w + (m.x0() + lx - x0)] |= bit;
      }
    }
  };
  for (const auto& m : pred) paint(m, 1);
  for (const auto& m : truth) paint(m, 2);
  std::size_t tp = 0, any = 0;
  for (std::uint8_t g : grid) {
    tp += g == 3;
    any += g != 0;
  }
  return any == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(any);
}

FrameTracks tracks_from_tracklets(const std::vector<Tracklet>& tracklets, int frames) {
  int n = frames;
  if (n < 0) {
    n = 0;
    for (const Tracklet& t : tracklets) {
      if (!t.states.empty()) n = std::max(n, t.last_frame() + 1);
    }
  }
  FrameTracks out(n);
  for (const Tracklet& t : tracklets) {
    for (const TrackState& s : t.states) {
      if (s.frame >= 0 && s.frame < n) out[s.frame].push_back({t.id, s.detection.center});
    }
  }
  return out;
}

FrameTracks tracks_from_truth(const GroundTruth& truth, bool ignore_occluded) {
  FrameTracks out(truth.frames.size());
  for (std::size_t t = 0; t < truth.frames.size(); ++t) {
    for (const ObjectTruth& o : truth.frames[t].objects) out[t].push_back({o.id, o.center, ignore_occluded && !o.visible});
  }
  return out;
}

namespace {

long sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0L); }

double dist(const TrackPoint& a, const TrackPoint& b) {
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
}

}  // namespace

long MotReport::total_misses() const { return sum(misses); }
long MotReport::total_false_positives() const { return sum(false_positives); }
long MotReport::total_mismatches() const { return sum(mismatches); }
long MotReport::total_ground_truth() const { return sum(ground_truth); }
long MotReport::total_matches() const {
  long n = 0;
  for (const auto& d : distances) n += static_cast<long>(d.size());
  return n;
}

MotReport clear_mot(const FrameTracks& hypotheses, const FrameTracks& truth, double match_threshold) {
  if (!(match_threshold > 0.0)) throw ContractError("clear_mot: match_threshold must be positive");
  const std::size_t frames = std::max(hypotheses.size(), truth.size());
  MotReport r;
  r.match_threshold = match_threshold;
  r.misses.assign(frames, 0);
  r.false_positives.assign(frames, 0);
  r.mismatches.assign(frames, 0);
  r.ground_truth.assign(frames, 0);
  r.distances.assign(frames, {});
  static const std::vector<TrackPoint> kNone;
  std::map<int, int> previous;  // truth id -> hypothesis id in the previous frame
  std::map<int, int> last;      // truth id -> most recent hypothesis id
  double distance_sum = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const auto& gt = t < truth.size() ? truth[t] : kNone;
    const auto& hy = t < hypotheses.size() ? hypotheses[t] : kNone;
    const int n = static_cast<int>(gt.size());
    const int m = static_cast<int>(hy.size());
    std::vector<int> gt_to_hy(n, -1);
    std::vector<char> hy_used(m, 0);
    std::map<int, int> hy_index;
    for (int j = 0; j < m; ++j) {
      if (!hy_index.emplace(hy[j].id, j).second) throw ContractError("clear_mot: duplicate hypothesis id in a frame");
    }
    // Scored truth is matched first; ignored truth only absorbs what is left.
    for (const bool phase_ignored : {false, true}) {
      for (int i = 0; i < n; ++i) {
        if (gt[i].ignored != phase_ignored) continue;
        const auto p = previous.find(gt[i].id);
        if (p == previous.end()) continue;
        const auto h = hy_index.find(p->second);
        if (h == hy_index.end() || hy_used[h->second]) continue;
        if (dist(gt[i], hy[h->second]) <= match_threshold) {
          gt_to_hy[i] = h->second;
          hy_used[h->second] = 1;
        }
      }
      std::vector<int> rows, cols;
      for (int i = 0; i < n; ++i) {
        if (gt[i].ignored == phase_ignored && gt_to_hy[i] < 0) rows.push_back(i);
      }
      for (int j = 0; j < m; ++j) {
        if (!hy_used[j]) cols.push_back(j);
      }
      if (rows.empty() || cols.empty()) continue;
      CostMatrix c(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
      for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
          const double d = dist(gt[rows[a]], hy[cols[b]]);
          if (d <= match_threshold) c.at(static_cast<int>(a), static_cast<int>(b)) = d;
        }
      }
      // Slack above any complete set of matches: cardinality first, distance second.
      const double slack = 2.0 * match_threshold * static_cast<double>(std::min(rows.size(), cols.size()) + 1) + 1.0;
      const Assignment a = solve_lap_with_slack(c, slack);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (a.row_to_col[k] >= 0) {
          gt_to_hy[rows[k]] = cols[a.row_to_col[k]];
          hy_used[cols[a.row_to_col[k]]] = 1;
        }
      }
    }
    std::map<int, int> current;
    int absorbed = 0;
    int counted = 0;
    for (int i = 0; i < n; ++i) {
      if (gt_to_hy[i] < 0) {
        if (!gt[i].ignored) ++r.misses[t];
        continue;
      }
      ++absorbed;
      const int hid = hy[gt_to_hy[i]].id;
      const auto l = last.find(gt[i].id);
      const bool switched = l != last.end() && l->second != hid;
      last[gt[i].id] = hid;
      current[gt[i].id] = hid;
      if (gt[i].ignored) continue;
      if (switched) ++r.mismatches[t];
      const double d = dist(gt[i], hy[gt_to_hy[i]]);
      r.distances[t].push_back(d);
      distance_sum += d;
    }
    previous = std::move(current);
    for (int i = 0; i < n; ++i) counted += gt[i].ignored ? 0 : 1;
    r.ground_truth[t] = counted;
    r.false_positives[t] = m - absorbed;
  }
  const long g = r.total_ground_truth();
  const long matches = r.total_matches();
  const long errors = r.total_misses() + r.total_false_positives() + r.total_mismatches();
  // one rounding of an integer ratio, so fixtures like 4/6 come out exact
  const long denom = std::max(g, 1L);
  r.mota = static_cast<double>(denom - errors) / static_cast<double>(denom);
  r.motp = g == 0 ? 0.0 : distance_sum / g;
  r.motp_matched = matches == 0 ? 0.0 : distance_sum / matches;
  return r;
}

std::string mot_report_json(const MotReport& r) {
  nlohmann::json doc;
  doc["mota"] = r.mota;
  doc["motp"] = r.motp;
  doc["motp_matched"] = r.motp_matched;
  doc["match_threshold"] = r.match_threshold;
  doc["frames"] = r.ground_truth.size();
  doc["ground_truth"] = r.total_ground_truth();
  doc["matches"] = r.total_matches();
  doc["misses"] = r.total_misses();
  doc["false_positives"] = r.total_false_positives();
  doc["mismatches"] = r.total_mismatches();
  return doc.dump(2);
}

std::string mot_frames_csv(const MotReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "frame,gt,misses,false_positives,mismatches,matches,distance_sum\n";
  for (std::size_t t = 0; t < r.ground_truth.size(); ++t) {
    const double d = std::accumulate(r.distances[t].begin(), r.distances[t].end(), 0.0);
    os << t << ',' << r.ground_truth[t] << ',' << r.misses[t] << ',' << r.false_positives[t] << ','
       << r.mismatches[t] << ',' << r.distances[t].size() << ',' << d << '\n';
  }
  return os.str();
}

}  // namespace ellitrack
