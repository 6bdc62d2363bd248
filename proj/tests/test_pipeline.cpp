// Copyright 2026 The muxgel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "muxgel/pipeline.hpp"
#include "test_support.hpp"

namespace muxgel {
namespace {

using testing::constant_rgb;
using testing::random_image;
using testing::random_mask;

GenConfig small_config() {
  GenConfig c;
  c.sensor = {19.2, 19.2, 0.3};
  return c;
}

Mask half_mask(int w, int h) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w / 2; ++x) m.at(x, y) = 1.0f;
  return m;
}

TEST(BackgroundMask, FarIsBackgroundNearIsNot) {
  const Image dark(10, 8, 3, 0.0f);
  const HeightField far(10, 8, 0.1, 100.0f);
  const HeightField near(10, 8, 0.1, 1.0f);
  EXPECT_EQ(background_mask(far, dark, 20.0, 0.01).count_nonzero(), 80u);
  EXPECT_EQ(background_mask(near, dark, 20.0, 0.01).count_nonzero(), 0u);
}

TEST(BackgroundMask, HalfPlaneSplitWithinClosingTolerance) {
  HeightField depth(16, 12, 0.1, 100.0f);
  for (int y = 0; y < 12; ++y)
    for (int x = 8; x < 16; ++x) depth.at(x, y) = 1.0f;
  const Mask m = background_mask(depth, Image(16, 12, 3, 0.0f), 20.0, 0.01);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) {
      if (x <= 6) { EXPECT_EQ(m.at(x, y), 1.0f); }
      if (x >= 9) { EXPECT_EQ(m.at(x, y), 0.0f); }
    }
}

TEST(ComposeRawVision, EndpointsAndHalfSplit) {
  std::mt19937 rng(1);
  const Image bg = random_image(rng, 8, 6, 3);
  const Image obj = random_image(rng, 8, 6, 3);
  EXPECT_TRUE(bit_equal(compose_raw_vision(bg, obj, Mask(8, 6, 1.0f)), bg));
  EXPECT_TRUE(bit_equal(compose_raw_vision(bg, obj, Mask(8, 6, 0.0f)), obj));
  const Image out = compose_raw_vision(bg, obj, half_mask(8, 6));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_EQ(out.at(x, y, c), x < 4 ? bg.at(x, y, c) : obj.at(x, y, c));
}

TEST(TactileDiff, Arithmetic) {
  std::mt19937 rng(2);
  const Image bg = random_image(rng, 12, 12, 3, 0.1f, 0.7f);
  const Image zero = tactile_diff(bg, bg);
  EXPECT_TRUE(zero.is_signed());
  for (float v : zero.data()) EXPECT_EQ(v, 0.0f);

  Image raw = bg;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        if ((x - 6) * (x - 6) + (y - 6) * (y - 6) <= 9) raw.at(x, y, c) += 0.2f;
  const Image d = tactile_diff(raw, bg);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) {
        const bool disk = (x - 6) * (x - 6) + (y - 6) * (y - 6) <= 9;
        EXPECT_NEAR(d.at(x, y, c), disk ? 0.2 : 0.0, 1e-6);
      }

  Image shadow = bg;
  shadow.at(3, 3, 1) -= 0.05f;
  EXPECT_LT(tactile_diff(shadow, bg).at(3, 3, 1), 0.0f);
}

TEST(ResidualTactile, ZeroDiffReturnsBackground) {
  std::mt19937 rng(3);
  const Image bg = random_image(rng, 9, 9, 3);
  const Image zero(9, 9, 3, 0.0f, true);
  EXPECT_TRUE(bit_equal(residual_tactile(zero, bg), bg));
}

TEST(ResidualTactile, DiskOnGreyAndClampCounter) {
  Image diff(10, 10, 3, 0.0f, true);
  for (int c = 0; c < 3; ++c)
    for (int y = 3; y < 6; ++y)
      for (int x = 3; x < 6; ++x) diff.at(x, y, c) = 0.3f;
  SaturationStats stats;
  const Image out = residual_tactile(diff, Image(10, 10, 3, 0.5f), &stats);
  EXPECT_NEAR(out.at(4, 4, 0), 0.8f, 1e-6);
  EXPECT_EQ(out.at(0, 0, 0), 0.5f);
  EXPECT_EQ(stats.clamped, 0u);

  const Image over = residual_tactile(diff, Image(10, 10, 3, 0.9f), &stats);
  EXPECT_EQ(over.at(4, 4, 2), 1.0f);
  EXPECT_EQ(stats.clamped, 27u);
}

TEST(Relight, EndpointsAndDisk) {
  std::mt19937 rng(4);
  const Image v = random_image(rng, 12, 12, 3);
  const Image t = random_image(rng, 12, 12, 3);
  const Image l = random_image(rng, 12, 12, 3);
  EXPECT_TRUE(bit_equal(relight(v, t, l, Mask(12, 12, 0.0f)), hadamard(v, l)));
  EXPECT_TRUE(bit_equal(relight(v, t, l, Mask(12, 12, 1.0f)), hadamard(v, t)));
  Mask disk(12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) disk.at(x, y) = (x - 5) * (x - 5) + (y - 6) * (y - 6) <= 12 ? 1.0f : 0.0f;
  const Image out = relight(v, t, l, disk);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) {
        const double gain = disk.at(x, y) > 0 ? t.at(x, y, c) : l.at(x, y, c);
        EXPECT_NEAR(out.at(x, y, c), v.at(x, y, c) * gain, 1e-6);
      }
}

TEST(MultiplexAndReference, Endpoints) {
  std::mt19937 rng(5);
  const Image a = random_image(rng, 8, 8, 3);
  const Image b = random_image(rng, 8, 8, 3);
  EXPECT_TRUE(bit_equal(multiplex(Mask(8, 8, 1.0f), a, b), a));
  EXPECT_TRUE(bit_equal(multiplex(Mask(8, 8, 0.0f), a, b), b));
  EXPECT_TRUE(bit_equal(reference_image(Mask(8, 8, 1.0f), a, b), a));
  EXPECT_TRUE(bit_equal(reference_image(Mask(8, 8, 0.0f), a, b), b));
}

TEST(MultiplexAndReference, CheckerSelection) {
  std::mt19937 rng(6);
  const Image t = random_image(rng, 32, 32, 3);
  const Image v = random_image(rng, 32, 32, 3);
  const Mask m = straight_mask(4, 4, 32, 32);
  for (const Image& out : {multiplex(m, t, v), reference_image(m, t, v)})
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const bool tac = ((x / 8) + (y / 8)) % 2 == 0;
          EXPECT_EQ(out.at(x, y, c), tac ? t.at(x, y, c) : v.at(x, y, c));
        }
}

TEST(ContactRatioFilter, Threshold) {
  EXPECT_FALSE(contact_ratio_filter(Mask(10, 10)).accepted);
  EXPECT_EQ(contact_ratio_filter(Mask(10, 10)).ratio, 0.0);
  Mask m(10, 10);
  for (int i = 0; i < 4; ++i) m.data()[i] = 1.0f;
  EXPECT_FALSE(contact_ratio_filter(m).accepted);
  m.data()[4] = 1.0f;
  EXPECT_FALSE(contact_ratio_filter(m).accepted);  // exactly 5% does not exceed
  m.data()[5] = 1.0f;
  const ContactDecision d = contact_ratio_filter(m);
  EXPECT_TRUE(d.accepted);
  EXPECT_DOUBLE_EQ(d.ratio, 0.06);
  EXPECT_THROW(contact_ratio_filter(m, 0.0), ConfigError);
}

TEST(Jitter, IdentityIsBitExact) {
  std::mt19937 rng(7);
  const Image a = random_image(rng, 10, 10, 3);
  const Image b = random_image(rng, 10, 10, 3);
  const auto out = correlated_jitter(JitterParams{}, {a, b});
  EXPECT_TRUE(bit_equal(out[0], a));
  EXPECT_TRUE(bit_equal(out[1], b));
}

TEST(Jitter, BrightnessOnGrey) {
  JitterParams p;
  p.brightness = 1.2;
  const Image out = apply_jitter(p, Image(4, 4, 3, 0.5f));
  for (float v : out.data()) EXPECT_NEAR(v, 0.6f, 1e-6);
}

// Scalar reference of the colour transform written from its definition.
std::array<double, 3> jitter_oracle(const JitterParams& p, std::array<double, 3> rgb) {
  auto clamp = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (double& v : rgb) v = clamp(v * p.brightness);
  for (double& v : rgb) v = clamp((v - 0.5) * p.contrast + 0.5);
  const double luma = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
  for (double& v : rgb) v = clamp(luma + p.saturation * (v - luma));
  const double mx = std::max({rgb[0], rgb[1], rgb[2]});
  const double mn = std::min({rgb[0], rgb[1], rgb[2]});
  if (mx - mn <= 0.0) return rgb;
  double h;
  if (mx == rgb[0]) h = 60.0 * std::fmod((rgb[1] - rgb[2]) / (mx - mn) + 6.0, 6.0);
  else if (mx == rgb[1]) h = 60.0 * ((rgb[2] - rgb[0]) / (mx - mn) + 2.0);
  else h = 60.0 * ((rgb[0] - rgb[1]) / (mx - mn) + 4.0);
  h = std::fmod(h + p.hue_deg + 360.0, 360.0);
  const double s = (mx - mn) / mx, v = mx;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  std::array<double, 3> o;
  if (h < 60) o = {c, x, 0};
  else if (h < 120) o = {x, c, 0};
  else if (h < 180) o = {0, c, x};
  else if (h < 240) o = {0, x, c};
  else if (h < 300) o = {x, 0, c};
  else o = {c, 0, x};
  for (double& q : o) q = clamp(q + m);
  return o;
}

TEST(Jitter, MatchesScalarOracle) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> f(0.7, 1.3), hue(-18, 18);
  for (int trial = 0; trial < 20; ++trial) {
    const JitterParams p{f(rng), f(rng), f(rng), hue(rng)};
    const Image img = random_image(rng, 8, 8, 3);
    const Image out = apply_jitter(p, img);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const auto want = jitter_oracle(p, {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)});
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(x, y, c), want[c], 2e-5);
      }
  }
}

TEST(Jitter, SameTransformOnEveryImage) {
  std::mt19937 rng(9);
  const Image a = random_image(rng, 6, 6, 3);
  const JitterParams p{1.1, 0.9, 1.2, 7.0};
  const auto out = correlated_jitter(p, {a, a});
  EXPECT_TRUE(bit_equal(out[0], out[1]));
  EXPECT_TRUE(bit_equal(out[0], apply_jitter(p, a)));
  EXPECT_THROW(correlated_jitter(p, {}), ConfigError);
}

TEST(WavyBoundary, Examples) {
  for (double t : {0.0, 0.1, 0.33, 0.9}) EXPECT_EQ(wavy_boundary(17.0, 0.0, 2.0, 1.0, t), 17.0);
  EXPECT_NEAR(wavy_boundary(10.0, 5.0, 1.0, 0.0, 0.25), 15.0, 1e-12);
  EXPECT_NEAR(wavy_boundary(10.0, 5.0, 1.0, 0.0, 0.5), 10.0, 1e-12);
}

TEST(StraightMask, Examples) {
  const Mask one = straight_mask(1, 1, 7, 5);
  EXPECT_EQ(one.count_nonzero(), 35u);

  const Mask q = straight_mask(2, 2, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(q.at(x, y), (x < 4) == (y < 4) ? 1.0f : 0.0f);

  const Mask m = straight_mask(4, 4, 320, 240);
  for (int y = 0; y < 240; ++y)
    for (int x = 0; x < 320; ++x) ASSERT_EQ(m.at(x, y), ((x / 80) + (y / 60)) % 2 == 0 ? 1.0f : 0.0f);
}

TEST(WavyMask, ZeroAmplitudeIsStraight) {
  for (int g = 2; g <= 8; ++g) {
    RandomStream rng(g, "wavy");
    const WavySpec spec = sample_wavy_spec(g, 0.0, 0.0, rng);
    EXPECT_TRUE(bit_equal(wavy_mask(spec, 64, 48), straight_mask(g, g, 64, 48))) << g;
  }
  EXPECT_TRUE(bit_equal(wavy_mask(WavySpec::straight(2), 8, 8), straight_mask(2, 2, 8, 8)));
}

TEST(WavyMask, TactileFractionNearHalf) {
  // Per draw at the sensor resolution; at 64x64 a 5 px wave spans a third of
  // a cell, so only the mean over draws stays near one half.
  double mean64 = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    RandomStream rng(s, "wavy");
    const WavySpec spec = sample_wavy_spec(4, 5.0, 5.0, rng);
    EXPECT_NEAR(wavy_mask(spec, 320, 240).mean(), 0.5, 0.08) << s;
    mean64 += wavy_mask(spec, 64, 64).mean() / 100.0;
  }
  EXPECT_NEAR(mean64, 0.5, 0.02);
}

TEST(WavyMask, DisplacementStaysWithinAmplitude) {
  RandomStream rng(5, "wavy");
  const WavySpec spec = sample_wavy_spec(4, 2.0, 3.0, rng);
  const Mask w = wavy_mask(spec, 64, 64);
  const Mask s = straight_mask(4, 4, 64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (w.at(x, y) == s.at(x, y)) continue;
      int dist = 64;
      for (int k = 1; k < 4; ++k) {
        dist = std::min(dist, std::abs(x - cell_edge(k, 64, 4)));
        dist = std::min(dist, std::abs(y - cell_edge(k, 64, 4)));
      }
      EXPECT_LE(dist, 3) << x << "," << y;
    }
}

TEST(WavyMask, RejectsGridTooFine) {
  EXPECT_THROW(wavy_mask(WavySpec::straight(8), 24, 64), ConfigError);
  RandomStream rng(1, "wavy");
  EXPECT_THROW(sample_wavy_spec(9, 0, 1, rng), ConfigError);
  EXPECT_THROW(sample_wavy_spec(4, 0, 6, rng), ConfigError);
}

TEST(GenConfig, DefaultsValidate) {
  EXPECT_FALSE(GenConfig{}.check().has_value());
  EXPECT_FALSE(small_config().check().has_value());
}

TEST(GenConfig, CheckReportsFieldPath) {
  GenConfig c = small_config();
  c.grid = {2, 9};
  ASSERT_TRUE(c.check().has_value());
  EXPECT_EQ(c.check()->path, "/grid");
  c = small_config();
  c.jitter.hue_deg = {-30, 0};
  EXPECT_EQ(c.check()->path, "/jitter/hue_deg");
  c = small_config();
  c.indenters[4].inner_radius_mm = {3.0, 4.0};
  EXPECT_EQ(c.check()->path, "/indenters/4/inner_radius_mm");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Synthesize, SameSeedIsBitIdentical) {
  const GenConfig cfg = small_config();
  const SceneAssets assets = prepare_assets(cfg);
  for (std::uint64_t seed : {1ull, 99ull, 12345ull}) {
    const SynthesisResult a = synthesize(cfg, assets, seed, false);
    const SynthesisResult b = synthesize(cfg, assets, seed, false);
    ASSERT_TRUE(a.accepted() && b.accepted());
    EXPECT_TRUE(bit_equal(a.sample->i_mux, b.sample->i_mux));
    EXPECT_TRUE(bit_equal(a.sample->i_ref, b.sample->i_ref));
    EXPECT_TRUE(bit_equal(a.sample->target_residual, b.sample->target_residual));
  }
}

TEST(Synthesize, AcceptedSamplesSatisfyIdentities) {
  const GenConfig cfg = small_config();
  const SceneAssets assets = prepare_assets(cfg);
  int accepted = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SynthesisResult r = synthesize_sample(cfg, assets, seed);
    if (!r.accepted()) {
      EXPECT_LE(r.rejection.contact_ratio, cfg.contact_threshold);
      continue;
    }
    ++accepted;
    const MuxSample& s = *r.sample;
    EXPECT_TRUE(verify_sample_identities(s));
    EXPECT_GT(s.contact_ratio, 0.05);
    EXPECT_TRUE(s.m_wavy.is_binary());
    EXPECT_TRUE(s.target_residual.is_signed());
  }
  EXPECT_GT(accepted, 10);
}

TEST(Synthesize, ShallowTinySphereIsRejected) {
  GenConfig cfg = small_config();
  IndenterPoolEntry tiny;
  tiny.shape = IndenterShape::sphere;
  tiny.radius_mm = {0.5, 0.5};
  cfg.indenters = {tiny};
  cfg.press_depth_mm = {0.0, 0.01};
  const SceneAssets assets = prepare_assets(cfg);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SynthesisResult r = synthesize_sample(cfg, assets, seed);
    EXPECT_FALSE(r.accepted());
    EXPECT_LT(r.rejection.contact_ratio, 0.05);
    EXPECT_EQ(r.rejection.seed, seed);
  }
}

TEST(Synthesize, NoContactUnitVisionStraightMaskGivesMuxEqualRef) {
  GenConfig cfg = small_config();
  cfg.amplitude_px = {0.0, 0.0};
  cfg.jitter = {{1, 1}, {1, 1}, {1, 1}, {0, 0}};
  cfg.press_depth_mm = {0.0, 0.0};
  cfg.background.source = ImageSource::constant;
  cfg.background.color = {1.0f, 1.0f, 1.0f};
  cfg.object.colors = {{1.0f, 1.0f, 1.0f}};
  cfg.object.texture = 0.0;
  cfg.object.shading = 0.0;
  const SceneAssets assets = prepare_assets(cfg);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SampleIntermediates keep;
    const SynthesisResult r = synthesize(cfg, assets, seed, false, &keep);
    ASSERT_TRUE(r.accepted());
    for (float v : keep.v_jit.data()) ASSERT_EQ(v, 1.0f);
    EXPECT_TRUE(bit_equal(r.sample->i_mux, r.sample->i_ref));
  }
}

TEST(Synthesize, JitterReplayOnIntermediates) {
  const GenConfig cfg = small_config();
  const SceneAssets assets = prepare_assets(cfg);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SampleIntermediates keep;
    const SynthesisResult r = synthesize(cfg, assets, seed, false, &keep);
    ASSERT_TRUE(r.accepted());
    EXPECT_TRUE(bit_equal(apply_jitter(r.sample->jitter, keep.t_bg), r.sample->t_bg_jit));
    EXPECT_TRUE(bit_equal(apply_jitter(r.sample->jitter, keep.v_raw), keep.v_jit));
  }
}

TEST(PrepareAssets, LightMapAndBaseShapes) {
  const GenConfig cfg = small_config();
  const SceneAssets a = prepare_assets(cfg);
  EXPECT_EQ(a.light_map.width(), 64);
  EXPECT_EQ(a.light_map.channels(), 3);
  EXPECT_EQ(a.tactile_base.height(), 64);
  for (float v : a.light_map.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

}  // namespace
}  // namespace muxgel
