#include <gtest/gtest.h>

#include <cmath>

#include "ellitrack/dei.hpp"
#include "ellitrack/error.hpp"
#include "ellitrack/synth.hpp"
#include "support.hpp"

using namespace ellitrack;
using ellitrack::testing::ellipse_mask;
using ellitrack::testing::TempDir;

namespace {

SceneConfig small(std::uint64_t seed = 3) {
  SceneConfig c;
  c.width = 120;
  c.height = 100;
  c.n_objects = 8;
  c.frames = 6;
  c.seed = seed;
  return c;
}

PixelMask full_ellipse(const GroundTruth& gt, const ObjectTruth& o) {
  return ellipse_mask(gt.width, gt.height, o.center, o.half_extents, o.orientation);
}

}  // namespace

TEST(Synth, StaticSceneRepeats) {
  SceneConfig c = small();
  c.n_objects = 1;
  c.speed_mean = 0;
  c.speed_jitter = 0;
  c.texture = Texture::flat;
  const Scene s = generate(c);
  ASSERT_EQ(s.frames.size(), 6u);
  for (std::size_t t = 1; t < s.frames.size(); ++t) {
    EXPECT_EQ(s.frames[t], s.frames[0]);
    EXPECT_EQ(s.truth.frames[t].objects[0].mask.count(), s.truth.frames[0].objects[0].mask.count());
  }
}

TEST(Synth, Deterministic) {
  SceneConfig c = small();
  c.noise_sigma = 0.05;
  c.occlusion_bias = 0.5;
  const Scene a = generate(c), b = generate(c, 3);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(truth_to_json(a.truth), truth_to_json(b.truth));
  c.seed = 4;
  EXPECT_NE(generate(c).frames, a.frames);
}

TEST(Synth, CrowdingAtHighBias) {
  SceneConfig c;
  c.width = 200;
  c.height = 200;
  c.n_objects = 50;
  c.frames = 20;
  c.occlusion_bias = 0.8;
  c.seed = 1;
  EXPECT_GE(overlapping_pair_fraction(generate(c).truth), 0.10);
}

TEST(Synth, IdentitiesStable) {
  const Scene s = generate(small());
  for (const FrameTruth& f : s.truth.frames) {
    ASSERT_EQ(f.objects.size(), 8u);
    for (std::size_t i = 0; i < f.objects.size(); ++i) EXPECT_EQ(f.objects[i].id, static_cast<int>(i));
  }
  for (std::size_t t = 1; t < s.truth.frames.size(); ++t) {
    for (std::size_t i = 0; i < 8; ++i) {
      const auto& p = s.truth.frames[t - 1].objects[i];
      const auto& q = s.truth.frames[t].objects[i];
      EXPECT_EQ(p.half_extents, q.half_extents);
      EXPECT_LT(std::hypot(p.center.x - q.center.x, p.center.y - q.center.y), 4.0);
    }
  }
}

TEST(Synth, MasksFollowDepthOrderAndVisibilityRule) {
  SceneConfig c = small(11);
  c.occlusion_bias = 0.9;
  c.n_objects = 16;
  const Scene s = generate(c);
  int invisible = 0;
  for (const FrameTruth& f : s.truth.frames) {
    std::vector<PixelMask> full;
    for (const ObjectTruth& o : f.objects) full.push_back(full_ellipse(s.truth, o));
    for (std::size_t i = 0; i < f.objects.size(); ++i) {
      const ObjectTruth& o = f.objects[i];
      PixelMask expect = full[i];
      for (std::size_t j = 0; j < i; ++j) expect.subtract(full[j]);
      ASSERT_EQ(o.full_area, full[i].count());
      ASSERT_EQ(o.mask.count(), expect.count());
      EXPECT_EQ(o.mask.intersection_count(expect), expect.count());
      const double covered = static_cast<double>(o.full_area - o.mask.count()) / static_cast<double>(o.full_area);
      EXPECT_EQ(o.visible, covered < 0.6) << covered;
      invisible += !o.visible;
    }
  }
  EXPECT_GT(invisible, 0);
}

TEST(Synth, FlatTextureMatchesMasks) {
  SceneConfig c = small(5);
  c.texture = Texture::flat;
  const Scene s = generate(c);
  const FrameTruth& f = s.truth.frames[2];
  PixelMask any(0, 0, c.width, c.height);
  for (const ObjectTruth& o : f.objects) any.merge(o.mask);
  for (int y = 0; y < c.height; ++y) {
    for (int x = 0; x < c.width; ++x) {
      EXPECT_EQ(s.frames[2].at(x, y), any.contains(x, y) ? c.foreground : c.background);
    }
  }
}

TEST(Synth, DeiProfilePeaksAtCentre) {
  SceneConfig c = small(6);
  c.n_objects = 1;
  const Scene s = generate(c);
  const ObjectTruth& o = s.truth.frames[0].objects[0];
  const int cx = static_cast<int>(std::lround(o.center.x)), cy = static_cast<int>(std::lround(o.center.y));
  EXPECT_GT(s.frames[0].at(cx, cy), 0.9);
  EXPECT_EQ(s.frames[0].at(0, 0), c.background);
}

TEST(Synth, ObjectsStayInFrame) {
  SceneConfig c = small(8);
  c.frames = 80;
  c.speed_mean = 5;
  const Scene s = generate(c);
  for (const FrameTruth& f : s.truth.frames) {
    for (const ObjectTruth& o : f.objects) {
      EXPECT_GE(o.center.x, 0);
      EXPECT_LT(o.center.x, c.width);
      EXPECT_GE(o.center.y, 0);
      EXPECT_LT(o.center.y, c.height);
      EXPECT_GE(o.orientation, 0);
      EXPECT_LT(o.orientation, std::numbers::pi);
    }
  }
}

TEST(Synth, InvalidConfigNamesTheKey) {
  const auto expect_key = [](SceneConfig c, const std::string& key) {
    try {
      generate(c);
      ADD_FAILURE() << key;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  SceneConfig c = small();
  c.n_objects = 0;
  expect_key(c, "scene.n_objects");
  c = small();
  c.occlusion_bias = 1.5;
  expect_key(c, "scene.occlusion_bias");
  c = small();
  c.min_separation = 500;
  expect_key(c, "scene.min_separation");
  EXPECT_THROW(parse_texture("plaid"), ConfigError);
  for (Texture t : {Texture::flat, Texture::dei_profile, Texture::noisy}) EXPECT_EQ(parse_texture(texture_name(t)), t);
}

TEST(Synth, TruthJsonRoundTrip) {
  SceneConfig c = small(9);
  c.occlusion_bias = 0.7;
  const GroundTruth gt = generate(c).truth;
  const std::string text = truth_to_json(gt);
  const GroundTruth back = truth_from_json(text);
  EXPECT_EQ(truth_to_json(back), text);
  ASSERT_EQ(back.frames.size(), gt.frames.size());
  for (std::size_t t = 0; t < gt.frames.size(); ++t) {
    for (std::size_t i = 0; i < gt.frames[t].objects.size(); ++i) {
      const auto& a = gt.frames[t].objects[i];
      const auto& b = back.frames[t].objects[i];
      EXPECT_EQ(a.center, b.center);
      EXPECT_EQ(a.visible, b.visible);
      EXPECT_EQ(a.mask.count(), b.mask.count());
      EXPECT_EQ(a.mask.intersection_count(b.mask), a.mask.count());
    }
  }
  TempDir dir("truth");
  save_truth(dir.path() / "t.json", gt);
  EXPECT_EQ(truth_to_json(load_truth(dir.path() / "t.json")), text);
  EXPECT_THROW(truth_from_json("{}", "x.json"), IoError);
}
