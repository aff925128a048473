#include "ellitrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ellitrack/dei.hpp"
#include "ellitrack/error.hpp"
#include "ellitrack/parallel.hpp"

namespace ellitrack {

using nlohmann::json;

Texture parse_texture(const std::string& name) {
  if (name == "flat") return Texture::flat;
  if (name == "dei-profile") return Texture::dei_profile;
  if (name == "noisy") return Texture::noisy;
  throw ConfigError("scene.texture: unknown texture '" + name + "' (expected flat, dei-profile or noisy)");
}

std::string texture_name(Texture texture) {
  switch (texture) {
    case Texture::flat: return "flat";
    case Texture::dei_profile: return "dei-profile";
    case Texture::noisy: return "noisy";
  }
  return "flat";
}

void SceneConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("scene." + key + ": " + what);
  };
  if (width < 8) fail("width", "must be >= 8");
  if (height < 8) fail("height", "must be >= 8");
  if (n_objects < 1) fail("n_objects", "must be >= 1");
  if (frames < 1) fail("frames", "must be >= 1");
  if (!(size_b > 0.0) || !(size_a > 0.0)) fail("size_a", "sizes must be positive");
  if (!(size_jitter >= 0.0) || !(size_b - size_jitter > 0.5)) fail("size_jitter", "must keep sizes above 0.5 px");
  if (!(speed_mean >= 0.0)) fail("speed_mean", "must be >= 0");
  if (!(speed_jitter >= 0.0)) fail("speed_jitter", "must be >= 0");
  if (!(turn_sigma >= 0.0)) fail("turn_sigma", "must be >= 0");
  if (!(occlusion_bias >= 0.0 && occlusion_bias <= 1.0)) fail("occlusion_bias", "must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma", "must be >= 0");
  if (!(background >= 0.0 && background <= 1.0)) fail("background", "must lie in [0, 1]");
  if (!(foreground >= 0.0 && foreground <= 1.0)) fail("foreground", "must lie in [0, 1]");
  if (!(profile_gain > 0.0)) fail("profile_gain", "must be positive");
  if (!(profile_k > 0.0 && profile_k < 1.0)) fail("profile_k", "must lie in (0, 1)");
  if (!(min_separation >= 0.0)) fail("min_separation", "must be >= 0");
  const double margin = size_a + size_jitter + 1.0;
  if (2.0 * margin >= width || 2.0 * margin >= height) fail("width", "frame too small for the object size");
}

namespace {

struct Walker {
  Point2 pos;
  Extents axes;
  double heading = 0.0;
  double speed = 0.0;
};

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

double axial(double heading) {
  double t = std::fmod(heading, std::numbers::pi);
  if (t < 0.0) t += std::numbers::pi;
  return t;
}

std::vector<std::vector<Walker>> simulate(const SceneConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double margin = cfg.size_a + cfg.size_jitter + 1.0;
  const double span_x = cfg.width - 2.0 * margin;
  const double span_y = cfg.height - 2.0 * margin;
  const double box = 1.0 - 0.75 * cfg.occlusion_bias;

  std::vector<Walker> walkers;
  for (int i = 0; i < cfg.n_objects; ++i) {
    Walker w;
    const double a = cfg.size_a + cfg.size_jitter * (2.0 * unit(rng) - 1.0);
    const double b = cfg.size_b + cfg.size_jitter * (2.0 * unit(rng) - 1.0);
    w.axes = {std::max(a, b), std::min(a, b)};
    for (int attempt = 0;; ++attempt) {
      w.pos.x = cfg.width / 2.0 + span_x * box * (unit(rng) - 0.5);
      w.pos.y = cfg.height / 2.0 + span_y * box * (unit(rng) - 0.5);
      if (cfg.min_separation <= 0.0) break;
      const bool clear = std::all_of(walkers.begin(), walkers.end(), [&](const Walker& o) {
        return std::hypot(o.pos.x - w.pos.x, o.pos.y - w.pos.y) >= cfg.min_separation;
      });
      if (clear) break;
      if (attempt > 10000) {
        throw ConfigError("scene.min_separation: cannot place " + std::to_string(cfg.n_objects) +
                          " objects with the requested separation");
      }
    }
    w.heading = 2.0 * std::numbers::pi * unit(rng);
    w.speed = std::max(0.0, cfg.speed_mean + cfg.speed_jitter * (2.0 * unit(rng) - 1.0));
    walkers.push_back(w);
  }

  constexpr double steer_rate = 0.15;
  std::vector<std::vector<Walker>> states;
  states.push_back(walkers);
  for (int t = 1; t < cfg.frames; ++t) {
    Point2 centroid;
    for (const Walker& w : walkers) {
      centroid.x += w.pos.x / walkers.size();
      centroid.y += w.pos.y / walkers.size();
    }
    for (Walker& w : walkers) {
      double turn = cfg.turn_sigma * gauss(rng);
      if (cfg.occlusion_bias > 0.0) {
        const double target = std::atan2(centroid.y - w.pos.y, centroid.x - w.pos.x);
        turn += cfg.occlusion_bias * steer_rate * wrap_angle(target - w.heading);
      }
      // heading doubles as orientation, so a resting object does not spin
      if (w.speed > 0.0) w.heading = wrap_angle(w.heading + turn);
      w.pos.x += w.speed * std::cos(w.heading);
      w.pos.y += w.speed * std::sin(w.heading);
      const double lo_x = margin, hi_x = cfg.width - 1.0 - margin;
      const double lo_y = margin, hi_y = cfg.height - 1.0 - margin;
      if (w.pos.x < lo_x) {
        w.pos.x = 2.0 * lo_x - w.pos.x;
        w.heading = wrap_angle(std::numbers::pi - w.heading);
      } else if (w.pos.x > hi_x) {
        w.pos.x = 2.0 * hi_x - w.pos.x;
        w.heading = wrap_angle(std::numbers::pi - w.heading);
      }
      if (w.pos.y < lo_y) {
        w.pos.y = 2.0 * lo_y - w.pos.y;
        w.heading = wrap_angle(-w.heading);
      } else if (w.pos.y > hi_y) {
        w.pos.y = 2.0 * hi_y - w.pos.y;
        w.heading = wrap_angle(-w.heading);
      }
    }
    states.push_back(walkers);
  }
  return states;
}

void render_frame(const SceneConfig& cfg, int t, const std::vector<Walker>& walkers, GrayImage& image_out,
                  FrameTruth& truth_out) {
  const int w = cfg.width;
  const int h = cfg.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<int> owner(n, -1);
  std::vector<double> value(n, cfg.background);
  std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(t), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  truth_out.objects.assign(walkers.size(), {});
  std::vector<PixelMask> full(walkers.size());
  // Paint back to front so lower ids end up on top.
  for (int i = static_cast<int>(walkers.size()) - 1; i >= 0; --i) {
    const Walker& wk = walkers[i];
    const double theta = axial(wk.heading);
    const PixelMask ellipse = rasterize_ellipse(wk.pos, wk.axes, theta);
    const DogParams dog = solve_variances(wk.axes.a, wk.axes.b, cfg.profile_k);
    const double f0 = eval_dog(dog, 0.0, 0.0);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    PixelMask inside(ellipse.x0(), ellipse.y0(), ellipse.width(), ellipse.height());
    for (int ly = 0; ly < ellipse.height(); ++ly) {
      for (int lx = 0; lx < ellipse.width(); ++lx) {
        if (!ellipse.local(lx, ly)) continue;
        const int x = ellipse.x0() + lx;
        const int y = ellipse.y0() + ly;
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        inside.set(x, y);
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        owner[p] = i;
        double v = cfg.foreground;
        if (cfg.texture == Texture::dei_profile) {
          const double dx = x - wk.pos.x;
          const double dy = y - wk.pos.y;
          const double f = eval_dog(dog, dx * c + dy * s, -dx * s + dy * c);
          v = cfg.background + (cfg.foreground - cfg.background) * std::min(1.0, cfg.profile_gain * std::max(f, 0.0) / f0);
        } else if (cfg.texture == Texture::noisy) {
          v = cfg.background + (cfg.foreground - cfg.background) * (0.7 + 0.3 * unit(rng));
        }
        value[p] = v;
      }
    }
    ObjectTruth& o = truth_out.objects[i];
    o.id = i;
    o.center = wk.pos;
    o.half_extents = wk.axes;
    o.orientation = theta;
    o.full_area = inside.count();
    full[i] = std::move(inside);
  }
  for (std::size_t i = 0; i < walkers.size(); ++i) {
    ObjectTruth& o = truth_out.objects[i];
    const PixelMask f = full[i].cropped();
    PixelMask visible(f.x0(), f.y0(), f.width(), f.height());
    for (int ly = 0; ly < f.height(); ++ly) {
      for (int lx = 0; lx < f.width(); ++lx) {
        const std::size_t p = static_cast<std::size_t>(f.y0() + ly) * w + (f.x0() + lx);
        if (f.local(lx, ly) && owner[p] == static_cast<int>(i)) visible.local(lx, ly) = 1;
      }
    }
    const std::size_t vis = visible.count();
    o.visible = o.full_area > 0 && static_cast<double>(o.full_area - vis) < 0.6 * static_cast<double>(o.full_area);
    o.mask = visible.cropped();
  }
  if (cfg.noise_sigma > 0.0) {
    for (double& v : value) v = std::clamp(v + cfg.noise_sigma * gauss(rng), 0.0, 1.0);
  }
  image_out = GrayImage(w, h, std::move(value));
}

}  // namespace

Scene generate(const SceneConfig& config, int threads) {
  config.validate();
  const auto states = simulate(config);
  Scene scene;
  scene.frames.resize(config.frames);
  scene.truth.width = config.width;
  scene.truth.height = config.height;
  scene.truth.frames.resize(config.frames);
  parallel_for(static_cast<std::size_t>(config.frames), threads, [&](std::size_t t) {
    render_frame(config, static_cast<int>(t), states[t], scene.frames[t], scene.truth.frames[t]);
  });
  return scene;
}

double overlapping_pair_fraction(const GroundTruth& truth) {
  std::size_t pairs = 0;
  std::size_t overlapping = 0;
  for (const FrameTruth& f : truth.frames) {
    std::vector<PixelMask> masks;
    for (const ObjectTruth& o : f.objects) masks.push_back(rasterize_ellipse(o.center, o.half_extents, o.orientation));
    for (std::size_t i = 0; i < masks.size(); ++i) {
      for (std::size_t j = i + 1; j < masks.size(); ++j) {
        ++pairs;
        if (masks[i].intersection_count(masks[j]) > 0) ++overlapping;
      }
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(overlapping) / static_cast<double>(pairs);
}

// --- JSON -----------------------------------------------------------------------

namespace {
constexpr const char* kTruthSchema = "ellitrack.truth";
constexpr int kTruthVersion = 1;
}  // namespace

std::string truth_to_json(const GroundTruth& truth) {
  json doc;
  doc["schema"] = kTruthSchema;
  doc["version"] = kTruthVersion;
  doc["width"] = truth.width;
  doc["height"] = truth.height;
  json frames = json::array();
  for (std::size_t t = 0; t < truth.frames.size(); ++t) {
    json objects = json::array();
    for (const ObjectTruth& o : truth.frames[t].objects) {
      json runs = json::array();
      for (const PixelRun& r : o.mask.runs()) runs.push_back({r.y, r.x, r.length});
      objects.push_back({{"id", o.id},
                         {"cx", o.center.x},
                         {"cy", o.center.y},
                         {"a", o.half_extents.a},
                         {"b", o.half_extents.b},
                         {"theta", o.orientation},
                         {"visible", o.visible},
                         {"full_area", o.full_area},
                         {"mask", runs}});
    }
    frames.push_back({{"frame", t}, {"objects", objects}});
  }
  doc["frames"] = frames;
  return doc.dump();
}

GroundTruth truth_from_json(const std::string& text, const std::string& source) {
  try {
    const json doc = json::parse(text);
    if (doc.value("schema", "") != kTruthSchema) throw IoError(source + ": not a ground-truth document");
    if (doc.at("version").get<int>() != kTruthVersion) {
      throw IoError(source + ": unsupported ground-truth version " + doc.at("version").dump());
    }
    GroundTruth truth;
    truth.width = doc.at("width").get<int>();
    truth.height = doc.at("height").get<int>();
    for (const json& f : doc.at("frames")) {
      FrameTruth frame;
      for (const json& o : f.at("objects")) {
        ObjectTruth obj;
        obj.id = o.at("id").get<int>();
        obj.center = {o.at("cx").get<double>(), o.at("cy").get<double>()};
        obj.half_extents = {o.at("a").get<double>(), o.at("b").get<double>()};
        obj.orientation = o.at("theta").get<double>();
        obj.visible = o.at("visible").get<bool>();
        obj.full_area = o.at("full_area").get<std::size_t>();
        std::vector<PixelRun> runs;
        for (const json& r : o.at("mask")) runs.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>()});
        obj.mask = PixelMask::from_runs(runs);
        frame.objects.push_back(std::move(obj));
      }
      truth.frames.push_back(std::move(frame));
    }
    return truth;
  } catch (const json::exception& e) {
    throw IoError(source + ": malformed ground truth (" + e.what() + ")");
  }
}

void save_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << truth_to_json(truth) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return truth_from_json(ss.str(), path.string());
}

}  // namespace ellitrack
