// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ellitrack/assign.hpp"
#include "ellitrack/dei.hpp"
#include "ellitrack/detector.hpp"
#include "ellitrack/forest.hpp"
#include "ellitrack/metrics.hpp"
#include "ellitrack/segmenter.hpp"
#include "ellitrack/synth.hpp"
#include "ellitrack/training.hpp"
#include "ellitrack_cli/commands.hpp"
#include "support.hpp"

using namespace ellitrack;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// 1 ------------------------------------------------------------------------------------------

Outcome dei_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ua(3.0, 30.0), ur(0.2, 1.0), uk(0.5, 0.98);
  double worst_zero = 0, worst_grad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double a = ua(rng);
    const double b = a * ur(rng);
    const DogParams p = solve_variances(a, b, uk(rng));
    const double f0 = eval_dog(p, 0, 0);
    const double c = std::sqrt(2.0) * a, d = std::sqrt(2.0) * b;
    for (int i = 0; i < 64; ++i) {
      const double t = 2 * std::numbers::pi * i / 64;
      worst_zero = std::max(worst_zero, std::abs(eval_dog(p, a * std::cos(t), b * std::sin(t))) / f0);
      const double x = c * std::cos(t), y = d * std::sin(t);
      const double h = 1e-4 * a;
      const double gx = (eval_dog(p, x + h, y) - eval_dog(p, x - h, y)) / (2 * h);
      const double gy = (eval_dog(p, x, y + h) - eval_dog(p, x, y - h)) / (2 * h);
      worst_grad = std::max(worst_grad, std::hypot(gx, gy) / f0);
    }
  }
  const double secs = seconds_since(t0);
  return {worst_zero < 1e-9 && worst_grad < 1e-5 && secs < 1.0,
          format("max |f|/f0 on (a,b) %.2e, max |grad f|/f0 on (sqrt2 a, sqrt2 b) %.2e, %.3fs", worst_zero,
                 worst_grad, secs)};
}

// 2 ------------------------------------------------------------------------------------------

double brute_lap(const CostMatrix& m) {
  const bool by_rows = m.rows <= m.cols;
  const int n = by_rows ? m.rows : m.cols, k = by_rows ? m.cols : m.rows;
  std::vector<char> used(k, 0);
  double best = kForbidden;
  std::function<void(int, double)> rec = [&](int i, double acc) {
    if (acc >= best) return;
    if (i == n) {
      best = acc;
      return;
    }
    for (int j = 0; j < k; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      rec(i + 1, acc + (by_rows ? m.at(i, j) : m.at(j, i)));
      used[j] = 0;
    }
  };
  rec(0, 0.0);
  return best;
}

Outcome lap_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_real_distribution<double> u(0, 100);
  int agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    CostMatrix m(dim(rng), dim(rng), 0.0);
    for (double& c : m.costs) c = u(rng);
    if (std::abs(solve_lap(m).total - brute_lap(m)) <= 1e-9 * std::max(1.0, brute_lap(m))) ++agree;
  }
  const double secs = seconds_since(t0);
  return {agree == 1000 && secs < 10.0, format("%d/1000 trials equal the brute-force minimum, %.2fs", agree, secs)};
}

// 3 ------------------------------------------------------------------------------------------

Outcome vm_acm_descent() {
  const auto t0 = Clock::now();
  int descended = 0, monotone = 0;
  double worst_rise = 0;
  for (int i = 0; i < 10; ++i) {
    const double theta = 0.31 * i;
    const Point2 c{40.0 + 0.37 * i, 36.0 - 0.23 * i};
    const Extents e{8.5 + 0.3 * i, 4.5 + 0.1 * i};
    const GrayImage img = testing::ellipse_image(80, 72, c, e, theta, 0.85 - 0.02 * i, 0.05 + 0.01 * i);
    Detection d;
    d.center = {c.x + (i % 3) - 1.0, c.y + (i % 2)};
    d.half_extents = {10, 5};
    d.orientation = theta + 0.05 * (i % 4);
    const SegmentWindow w = segment_window(img, d);
    LevelSet ls = init_levelset(d, w, build_kernel(10, 5, 0.9));
    EvolveTrace trace;
    evolve(ls, w, SegmenterParams{}, &trace);
    descended += trace.energies.back() < trace.energies.front();
    bool ok = true;
    for (std::size_t k = 1; k < trace.energies.size(); ++k) {
      if (trace.after_reinit[k]) continue;
      const double rise = trace.energies[k] - trace.energies[k - 1];
      worst_rise = std::max(worst_rise, rise);
      ok = ok && rise <= 1e-10;
    }
    monotone += ok;
  }

  // analytic gradient against central differences on a random 32x32 field
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> data(32 * 32);
  for (double& v : data) v = u(rng);
  const GrayImage img(32, 32, data);
  Detection d;
  d.center = {16, 16};
  d.half_extents = {9, 5};
  d.orientation = 0.4;
  const SegmentWindow w = segment_window(img, d);
  LevelSet ls = init_levelset(d, w, build_kernel(9, 5, 0.9));
  std::normal_distribution<double> g(0, 0.5);
  for (double& p : ls.phi) p = 0.3 * p + g(rng);
  const auto grad = energy_gradient(ls, w.data);
  std::uniform_int_distribution<std::size_t> site(0, ls.phi.size() - 1);
  int sites = 0;
  double worst_rel = 0;
  while (sites < 100) {
    const std::size_t i = site(rng);
    if (std::abs(grad[i]) < 1e-7) continue;
    LevelSet plus = ls, minus = ls;
    plus.phi[i] += 1e-4;
    minus.phi[i] -= 1e-4;
    const double fd = (energy(plus, w.data) - energy(minus, w.data)) / 2e-4;
    worst_rel = std::max(worst_rel, std::abs(fd - grad[i]) / std::abs(grad[i]));
    ++sites;
  }
  const double secs = seconds_since(t0);
  return {descended == 10 && monotone == 10 && worst_rel < 1e-5 && secs < 30.0,
          format("%d/10 descended, %d/10 monotone (max rise %.1e), gradient max rel err %.1e over 100 sites, %.1fs",
                 descended, monotone, worst_rise, worst_rel, secs)};
}

// 4 ------------------------------------------------------------------------------------------

Outcome sparse_detection() {
  const auto t0 = Clock::now();
  long tp = 0, truth = 0, found = 0;
  for (std::uint64_t seed : {3, 4, 5}) {
    SceneConfig sc;
    sc.width = sc.height = 512;
    sc.n_objects = 100;
    sc.frames = 1;
    sc.min_separation = 40;
    sc.seed = seed;
    const Scene s = generate(sc);
    const auto hits = detect_iterative(s.frames[0], DetectorConfig{}, ellipse_segmenter());
    std::vector<char> used(hits.size(), 0);
    for (const ObjectTruth& o : s.truth.frames[0].objects) {
      int best = -1;
      double bd = 1.5;
      for (std::size_t i = 0; i < hits.size(); ++i) {
        const double dd = std::hypot(hits[i].detection.center.x - o.center.x, hits[i].detection.center.y - o.center.y);
        if (!used[i] && dd <= bd) {
          bd = dd;
          best = static_cast<int>(i);
        }
      }
      if (best >= 0) {
        used[best] = 1;
        ++tp;
      }
    }
    truth += static_cast<long>(s.truth.frames[0].objects.size());
    found += static_cast<long>(hits.size());
  }
  const double recall = static_cast<double>(tp) / truth;
  const double precision = found ? static_cast<double>(tp) / found : 0.0;
  const double secs = seconds_since(t0);
  return {recall >= 0.95 && precision >= 0.95 && secs < 60.0,
          format("recall %.4f precision %.4f at 1.5 px over 3 scenes, %.1fs", recall, precision, secs)};
}

// 5 ------------------------------------------------------------------------------------------

double frame_voc(const std::vector<SegmentedDetection>& hits, const FrameTruth& f) {
  std::vector<PixelMask> pred, gt;
  for (const auto& h : hits) pred.push_back(h.mask.pixels);
  for (const auto& o : f.objects) gt.push_back(o.mask);
  return voc_score(pred, gt);
}

Outcome iterative_detection() {
  const auto t0 = Clock::now();
  SceneConfig sc;
  sc.width = sc.height = 256;
  sc.n_objects = 60;
  sc.frames = 1;
  sc.occlusion_bias = 0.3;
  sc.min_separation = 14;
  sc.noise_sigma = 0.02;
  sc.texture = Texture::flat;
  sc.seed = 1;
  const Scene s = generate(sc);
  DetectorConfig one;
  one.iterations = 1;
  DetectorConfig four;
  four.iterations = 4;
  const double v1 = frame_voc(detect_iterative(s.frames[0], one, vm_acm_segmenter(one.k)), s.truth.frames[0]);
  const double v4 = frame_voc(detect_iterative(s.frames[0], four, vm_acm_segmenter(four.k)), s.truth.frames[0]);
  return {v4 - v1 >= 0.03 && v4 >= 0.80,
          format("VOC 1 iteration %.4f, 4 iterations %.4f (gain %.4f), %.1fs", v1, v4, v4 - v1, seconds_since(t0))};
}

// 6 ------------------------------------------------------------------------------------------

Outcome concave_segmentation() {
  double worst = 1.0;
  int n = 0;
  for (double bite_r : {3.0, 3.5, 4.0}) {
    for (double side : {-1.0, 1.0}) {
      for (double theta : {0.0, 0.6}) {
        const Point2 c{40, 32};
        const Extents e{10, 5};
        PixelMask truth = testing::ellipse_mask(80, 64, c, e, theta);
        const Point2 bite{c.x + side * 9 * std::cos(theta), c.y + side * 9 * std::sin(theta)};
        std::vector<double> d(80 * 64, 0.0);
        for (int y = 0; y < 64; ++y) {
          for (int x = 0; x < 80; ++x) {
            if (std::hypot(x - bite.x, y - bite.y) <= bite_r) truth.set(x, y, false);
            if (truth.contains(x, y)) d[y * 80 + x] = 1.0;
          }
        }
        Detection det;
        det.center = c;
        det.half_extents = e;
        det.orientation = theta;
        const auto mask = segment(GrayImage(80, 64, d), det, 0.9);
        const PixelMask pred[] = {mask ? mask->pixels : PixelMask()};
        const PixelMask gt[] = {truth};
        worst = std::min(worst, voc_score(pred, gt));
        ++n;
      }
    }
  }
  return {worst >= 0.85, format("minimum VOC %.4f over %d ellipse-with-bite fixtures", worst, n)};
}

// 7 ------------------------------------------------------------------------------------------

Outcome forest_sanity() {
  const auto samples = testing::separable_samples(100, 7);
  const auto t0 = Clock::now();
  const Forest a = train_forest(samples, 50, 7);
  const double secs = seconds_since(t0);
  const Forest b = train_forest(samples, 50, 7);
  const Forest c = train_forest(samples, 50, 7, 3);
  const bool same = a == b && a == c && forest_to_json(a) == forest_to_json(b);
  return {a.oob_accuracy >= 0.95 && same && a.n_trees() == 50,
          format("oob_accuracy %.4f with 50 trees on 100+100 samples (%.2fs), deterministic: %s", a.oob_accuracy,
                 secs, same ? "yes" : "no")};
}

// 8 ------------------------------------------------------------------------------------------

Outcome tracking_ablation() {
  const auto t0 = Clock::now();
  const std::uint64_t seed = 1;
  SceneConfig sc;
  sc.width = sc.height = 384;
  sc.n_objects = 50;
  sc.frames = 100;
  sc.occlusion_bias = 0.6;
  sc.seed = seed;
  SceneConfig tc = sc;
  tc.seed = seed + 1000;
  SampleParams sp;
  sp.seed = seed;
  const Forest forest = train_forest(samples_from_truth(observations_from_truth(generate(tc)), sp), 50, seed);

  const Scene scene = generate(sc);
  TruthObservations obs = observations_from_truth(scene);
  inject_dropouts(obs, 0.02, 2, seed);
  const FrameTracks truth = tracks_from_truth(scene.truth, true);
  const auto score = [&](const std::vector<Tracklet>& t) { return clear_mot(tracks_from_tracklets(t, 100), truth, 20.0); };

  TrackParams lap;
  const auto tracklets = track_frames(obs.frames, forest, lap);
  auto tlap = tracklets;
  canonicalize(tlap);
  const MotReport full = score(link_tracklets(tracklets, obs.frames, forest, lap));
  const MotReport no_link = score(tlap);
  TrackParams greedy;
  greedy.matcher = Matcher::greedy;
  auto nn = track_frames(obs.frames, forest, greedy);
  canonicalize(nn);
  const MotReport nearest = score(nn);

  const double secs = seconds_since(t0);
  const bool pass = full.mota - no_link.mota >= 0.03 && full.mota - nearest.mota >= 0.03 && full.mota >= 0.90 &&
                    full.total_mismatches() < no_link.total_mismatches() && secs < 300.0;
  return {pass, format("MOTA two-stage %.4f, no linking %.4f, greedy nearest %.4f; mismatches %ld vs %ld; %.1fs",
                       full.mota, no_link.mota, nearest.mota, full.total_mismatches(), no_link.total_mismatches(),
                       secs)};
}

// 9 ------------------------------------------------------------------------------------------

Outcome metrics_fixtures() {
  FrameTracks truth(3), hyp(3);
  for (int t = 0; t < 3; ++t) truth[t] = {{1, {10, 10}}, {2, {60, 10}}};
  hyp[0] = {{1, {10, 10}}, {2, {60, 10}}};
  hyp[1] = {{1, {10, 10}}};
  hyp[2] = {{1, {10, 10}}, {3, {60, 10}}};
  const double mota = clear_mot(hyp, truth, 5.0).mota;

  PixelMask p(0, 0, 20, 10), g(0, 0, 20, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      p.set(x, y);
      g.set(x + 5, y);
    }
  }
  const PixelMask pred[] = {p};
  const PixelMask gt[] = {g};
  const double voc = voc_score(pred, gt);
  return {mota == 2.0 / 3.0 && voc == 1.0 / 3.0,
          format("MOTA %.17g (2/3 exact: %s), VOC %.17g (1/3 exact: %s)", mota, mota == 2.0 / 3.0 ? "yes" : "no", voc,
                 voc == 1.0 / 3.0 ? "yes" : "no")};
}

// 10 and 11 -----------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Runs the smoke pipeline into `dir`; returns wall time in seconds.
double smoke_run(const fs::path& dir, int threads) {
  cli::CommandOptions o;
  o.out = dir;
  o.config = fs::path(ELLITRACK_TEST_DATA) / "smoke.ini";
  o.threads = threads;
  std::ostringstream log;
  const auto t0 = Clock::now();
  int status = cli::cmd_gen(o, log) | cli::cmd_detect(o, log);
  cli::CommandOptions train = o;
  train.from_truth = true;
  status |= cli::cmd_train(train, log) | cli::cmd_track(o, log) | cli::cmd_eval(o, log) | cli::cmd_render(o, log);
  const double secs = seconds_since(t0);
  if (status != 0) throw std::runtime_error("smoke pipeline failed:\n" + log.str());
  return secs;
}

struct SmokeResults {
  Outcome determinism;
  Outcome budget;
};

SmokeResults smoke() {
  testing::TempDir a("acc-a"), b("acc-b"), c("acc-c");
  const double secs = smoke_run(a.path(), 1);
  smoke_run(b.path(), 1);
  smoke_run(c.path(), 3);
  int files = 0, identical = 0;
  std::string differing;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.path());
    ++files;
    const std::string x = slurp(entry.path());
    if (x == slurp(b.path() / rel) && x == slurp(c.path() / rel)) {
      ++identical;
    } else if (differing.empty()) {
      differing = rel.string();
    }
  }
  const auto eval = nlohmann::json::parse(slurp(a.path() / "eval.json"));
  SmokeResults r;
  r.determinism = {files > 0 && identical == files,
                   format("%d/%d artifacts byte-identical across two single-thread runs and a 3-thread run%s%s",
                          identical, files, differing.empty() ? "" : "; first difference: ", differing.c_str())};
  r.budget = {secs < 60.0, format("smoke pipeline (20 objects, 60 frames, 256x256) in %.1fs; MOTA %.4f VOC %.4f", secs,
                                  eval.at("mota").get<double>(), eval.at("voc").get<double>())};
  return r;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("%s %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  const auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("error: ") + e.what()};
    }
  };
  report(1, "dei-identities", guarded(dei_identities));
  report(2, "lap-exactness", guarded(lap_exactness));
  report(3, "vm-acm-descent", guarded(vm_acm_descent));
  report(4, "sparse-detection", guarded(sparse_detection));
  report(5, "iterative-detection", guarded(iterative_detection));
  report(6, "concave-segmentation", guarded(concave_segmentation));
  report(7, "forest-sanity", guarded(forest_sanity));
  report(8, "tracking-ablation", guarded(tracking_ablation));
  report(9, "metrics-fixtures", guarded(metrics_fixtures));
  SmokeResults s;
  try {
    s = smoke();
  } catch (const std::exception& e) {
    s.determinism = s.budget = {false, std::string("error: ") + e.what()};
  }
  report(10, "determinism", s.determinism);
  report(11, "smoke-budget", s.budget);
  std::printf("%d of 11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
