#include "ellitrack/assign.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "ellitrack/error.hpp"
#include "ellitrack/parallel.hpp"

namespace ellitrack {

CostMatrix::CostMatrix(int r, int c, double fill)
    : rows(r), cols(c), costs(static_cast<std::size_t>(std::max(r, 0)) * std::max(c, 0), fill) {
  if (r < 0 || c < 0) throw ContractError("CostMatrix: negative dimensions");
}

CostMatrix::CostMatrix(int r, int c, std::vector<double> values) : rows(r), cols(c), costs(std::move(values)) {
  if (r < 0 || c < 0 || costs.size() != static_cast<std::size_t>(r) * c) {
    throw ContractError("CostMatrix: value count does not match dimensions");
  }
}

namespace {

void check_entries(const CostMatrix& m) {
  for (double v : m.costs) {
    if (std::isnan(v) || v == -kForbidden) throw ContractError("CostMatrix: entries must be finite or kForbidden");
  }
}

// Hungarian method with potentials for n <= m; a(i, j) 1-based.
template <typename Cost>
std::vector<int> hungarian(int n, int m, Cost a) {
  const double inf = kForbidden;
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double c = a(i0, j);
        if (c != inf) {
          const double cur = c - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (delta == inf) throw InfeasibleError("solve_lap: no complete assignment avoids forbidden entries");
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else if (minv[j] != inf) {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double total_of(const CostMatrix& m, const std::vector<int>& row_to_col) {
  double t = 0.0;
  for (int r = 0; r < m.rows; ++r) {
    if (row_to_col[r] >= 0) t += m.at(r, row_to_col[r]);
  }
  return t;
}

}  // namespace

Assignment solve_lap(const CostMatrix& m) {
  check_entries(m);
  Assignment out;
  out.row_to_col.assign(m.rows, -1);
  if (m.rows == 0 || m.cols == 0) return out;
  if (m.rows <= m.cols) {
    out.row_to_col = hungarian(m.rows, m.cols, [&](int i, int j) { return m.at(i - 1, j - 1); });
  } else {
    const std::vector<int> col_to_row = hungarian(m.cols, m.rows, [&](int i, int j) { return m.at(j - 1, i - 1); });
    for (int c = 0; c < m.cols; ++c) out.row_to_col[col_to_row[c]] = c;
  }
  out.total = total_of(m, out.row_to_col);
  return out;
}

Assignment solve_lap_with_slack(const CostMatrix& m, double slack) {
  check_entries(m);
  if (!(slack > 0.0) || !std::isfinite(slack)) throw ContractError("solve_lap_with_slack: slack must be positive and finite");
  const int n = m.rows;
  const int k = m.cols;
  const int size = n + k;
  const double half = slack / 2.0;
  Assignment out;
  out.row_to_col.assign(n, -1);
  if (n == 0 || k == 0) return out;
  // [ C        | diag(s/2) ]
  // [ diag(s/2)| 0         ]
  const auto a = [&](int i, int j) -> double {
    const int r = i - 1;
    const int c = j - 1;
    if (r < n && c < k) return m.at(r, c);
    if (r < n) return c - k == r ? half : kForbidden;
    if (c < k) return r - n == c ? half : kForbidden;
    return 0.0;
  };
  const std::vector<int> full = hungarian(size, size, a);
  for (int r = 0; r < n; ++r) {
    if (full[r] < k) out.row_to_col[r] = full[r];
  }
  out.total = total_of(m, out.row_to_col);
  return out;
}

Assignment solve_greedy(const CostMatrix& m, double slack) {
  check_entries(m);
  Assignment out;
  out.row_to_col.assign(m.rows, -1);
  std::vector<char> taken(m.cols, 0);
  for (int r = 0; r < m.rows; ++r) {
    int best = -1;
    double best_cost = slack;
    for (int c = 0; c < m.cols; ++c) {
      if (taken[c]) continue;
      if (m.at(r, c) < best_cost) {
        best_cost = m.at(r, c);
        best = c;
      }
    }
    if (best >= 0) {
      out.row_to_col[r] = best;
      taken[best] = 1;
    }
  }
  out.total = total_of(m, out.row_to_col);
  return out;
}

// --- tracking ---------------------------------------------------------------------

namespace {

TrackState state_of(const ObjectDescriptor& d, int frame, int observation) {
  TrackState s;
  s.frame = frame;
  s.detection = d.detection;
  s.detection.frame = frame;
  s.mask = d.mask;
  s.observation = observation;
  return s;
}

double centroid_distance(const ObjectDescriptor& a, const ObjectDescriptor& b) {
  return std::hypot(a.mask.centroid.x - b.mask.centroid.x, a.mask.centroid.y - b.mask.centroid.y);
}

Assignment match(const CostMatrix& costs, const TrackParams& params) {
  return params.matcher == Matcher::greedy ? solve_greedy(costs, params.slack_cost)
                                           : solve_lap_with_slack(costs, params.slack_cost);
}

void validate(const TrackParams& p) {
  if (!(p.gate_radius > 0.0)) throw ConfigError("assign.gate_radius: must be positive");
  if (!(p.slack_cost > 0.0)) throw ConfigError("assign.slack_cost: must be positive");
  if (p.max_gap < 1) throw ConfigError("assign.max_gap: must be >= 1");
  if (!(p.gate_radius_per_frame > 0.0)) throw ConfigError("assign.gate_radius_per_frame: must be positive");
}

}  // namespace

std::vector<Tracklet> track_frames(const ObservationSequence& frames, const Forest& forest, const TrackParams& params) {
  validate(params);
  if (frames.empty()) throw ContractError("track_frames: no frames");
  std::vector<Tracklet> tracklets;
  std::vector<int> active;  // tracklet index of each observation in the previous frame
  for (std::size_t j = 0; j < frames[0].size(); ++j) {
    tracklets.push_back({static_cast<int>(tracklets.size()), {state_of(frames[0][j], 0, static_cast<int>(j))}});
    active.push_back(static_cast<int>(tracklets.size()) - 1);
  }
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const auto& prev = frames[t - 1];
    const auto& cur = frames[t];
    CostMatrix costs(static_cast<int>(prev.size()), static_cast<int>(cur.size()));
    parallel_for(prev.size(), params.threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < cur.size(); ++j) {
        if (centroid_distance(prev[i], cur[j]) > params.gate_radius) continue;
        costs.at(static_cast<int>(i), static_cast<int>(j)) = 1.0 - forest.votes(pair_features(prev[i], cur[j]));
      }
    });
    const Assignment a = match(costs, params);
    std::vector<int> next(cur.size(), -1);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (a.row_to_col[i] >= 0) next[a.row_to_col[i]] = active[i];
    }
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const TrackState s = state_of(cur[j], static_cast<int>(t), static_cast<int>(j));
      if (next[j] >= 0) {
        tracklets[next[j]].states.push_back(s);
      } else {
        tracklets.push_back({static_cast<int>(tracklets.size()), {s}});
        next[j] = static_cast<int>(tracklets.size()) - 1;
      }
    }
    active = std::move(next);
  }
  return tracklets;
}

Tracklet fill_gaps(const Tracklet& tracklet) {
  Tracklet out;
  out.id = tracklet.id;
  for (std::size_t k = 0; k < tracklet.states.size(); ++k) {
    const TrackState& s = tracklet.states[k];
    if (k > 0) {
      const TrackState& p = tracklet.states[k - 1];
      if (s.frame <= p.frame) throw ContractError("fill_gaps: frames must be strictly increasing");
      const int gap = s.frame - p.frame;
      for (int f = p.frame + 1; f < s.frame; ++f) {
        const double w = static_cast<double>(f - p.frame) / gap;
        const TrackState& near = (f - p.frame) <= (s.frame - f) ? p : s;
        TrackState d;
        d.frame = f;
        d.is_dummy = true;
        d.detection = near.detection;
        d.detection.frame = f;
        d.detection.fit = 0.0;
        d.detection.center = {p.detection.center.x + w * (s.detection.center.x - p.detection.center.x),
                              p.detection.center.y + w * (s.detection.center.y - p.detection.center.y)};
        out.states.push_back(d);
      }
    }
    out.states.push_back(s);
  }
  return out;
}

void canonicalize(std::vector<Tracklet>& tracklets) {
  std::stable_sort(tracklets.begin(), tracklets.end(), [](const Tracklet& l, const Tracklet& r) {
    const auto& a = l.states.front();
    const auto& b = r.states.front();
    return std::tie(a.frame, a.detection.center.y, a.detection.center.x) <
           std::tie(b.frame, b.detection.center.y, b.detection.center.x);
  });
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    tracklets[i].id = static_cast<int>(i);
    for (TrackState& s : tracklets[i].states) s.detection.id = static_cast<int>(i);
  }
}

std::vector<Tracklet> link_tracklets(const std::vector<Tracklet>& tracklets, const ObservationSequence& frames,
                                     const Forest& forest, const TrackParams& params) {
  validate(params);
  const int n = static_cast<int>(tracklets.size());
  const auto descriptor = [&](const TrackState& s) -> const ObjectDescriptor& {
    if (s.observation < 0 || s.frame < 0 || static_cast<std::size_t>(s.frame) >= frames.size() ||
        static_cast<std::size_t>(s.observation) >= frames[s.frame].size()) {
      throw ContractError("link_tracklets: tracklet endpoint has no observation");
    }
    return frames[s.frame][s.observation];
  };
  CostMatrix costs(n, n);
  parallel_for(static_cast<std::size_t>(n), params.threads, [&](std::size_t ui) {
    const int i = static_cast<int>(ui);
    const TrackState& end = tracklets[i].states.back();
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const TrackState& start = tracklets[j].states.front();
      const int dt = start.frame - end.frame;
      if (dt < 1 || dt > params.max_gap) continue;
      const ObjectDescriptor& a = descriptor(end);
      const ObjectDescriptor& b = descriptor(start);
      if (centroid_distance(a, b) > dt * params.gate_radius_per_frame) continue;
      FeatureVector fv = pair_features(a, b);
      fv.center_dist /= dt;
      costs.at(i, j) = 1.0 - forest.votes(fv);
    }
  });
  const Assignment a = solve_lap_with_slack(costs, params.slack_cost);
  std::vector<int> prev(n, -1);
  for (int i = 0; i < n; ++i) {
    if (a.row_to_col[i] >= 0) prev[a.row_to_col[i]] = i;
  }
  std::vector<Tracklet> out;
  for (int i = 0; i < n; ++i) {
    if (prev[i] >= 0) continue;
    Tracklet merged;
    merged.id = tracklets[i].id;
    for (int k = i; k >= 0; k = a.row_to_col[k]) {
      merged.states.insert(merged.states.end(), tracklets[k].states.begin(), tracklets[k].states.end());
    }
    out.push_back(fill_gaps(merged));
  }
  canonicalize(out);
  return out;
}

// --- CSV ------------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string trajectories_csv_header() { return "track_id,frame,cx,cy,a,b,theta,is_dummy"; }

std::string trajectories_to_csv(const std::vector<Tracklet>& tracklets) {
  std::string out = trajectories_csv_header() + "\n";
  for (const Tracklet& t : tracklets) {
    for (const TrackState& s : t.states) {
      const Detection& d = s.detection;
      out += std::to_string(t.id) + ',' + std::to_string(s.frame) + ',' + fmt(d.center.x) + ',' + fmt(d.center.y) +
             ',' + fmt(d.half_extents.a) + ',' + fmt(d.half_extents.b) + ',' + fmt(d.orientation) + ',' +
             (s.is_dummy ? "1" : "0") + '\n';
    }
  }
  return out;
}

std::vector<Tracklet> trajectories_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != trajectories_csv_header()) {
    throw IoError(source + ": expected header '" + trajectories_csv_header() + "'");
  }
  std::map<int, Tracklet> by_id;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw IoError(source + ":" + std::to_string(lineno) + ": expected 8 columns");
    try {
      TrackState s;
      const int id = std::stoi(f[0]);
      s.frame = std::stoi(f[1]);
      s.detection.center = {std::stod(f[2]), std::stod(f[3])};
      s.detection.half_extents = {std::stod(f[4]), std::stod(f[5])};
      s.detection.orientation = std::stod(f[6]);
      s.detection.frame = s.frame;
      s.detection.id = id;
      s.is_dummy = f[7] == "1";
      Tracklet& t = by_id[id];
      t.id = id;
      if (!t.states.empty() && t.states.back().frame >= s.frame) {
        throw IoError(source + ":" + std::to_string(lineno) + ": frames of track " + f[0] + " not increasing");
      }
      t.states.push_back(std::move(s));
    } catch (const std::logic_error&) {
      throw IoError(source + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  std::vector<Tracklet> out;
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

void save_trajectories(const std::filesystem::path& path, const std::vector<Tracklet>& tracklets) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << trajectories_to_csv(tracklets);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Tracklet> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return trajectories_from_csv(ss.str(), path.string());
}

}  // namespace ellitrack
