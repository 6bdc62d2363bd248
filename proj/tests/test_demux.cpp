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

#include <random>

#include "muxgel/demux.hpp"
#include "muxgel/metrics.hpp"
#include "muxgel/pipeline.hpp"
#include "test_support.hpp"

namespace muxgel {
namespace {

using testing::constant_rgb;
using testing::random_image;

TEST(DemuxMode, ParsesTags) {
  EXPECT_EQ(parse_demux_mode("si"), DemuxMode::si);
  EXPECT_EQ(parse_demux_mode("di-abst"), DemuxMode::di_abst);
  EXPECT_EQ(parse_demux_mode("di-rest"), DemuxMode::di_rest);
  EXPECT_EQ(to_string(DemuxMode::di_rest), "di-rest");
  EXPECT_THROW(parse_demux_mode("dirt"), ConfigError);
  EXPECT_EQ(parse_mask_source("provided"), MaskSource::provided);
  EXPECT_THROW(parse_mask_source("wavy"), ConfigError);
}

TEST(SplitByMask, AllOnesAndPartition) {
  std::mt19937 rng(1);
  const Image mux = random_image(rng, 16, 16, 3);
  const SplitFields all = split_by_mask(mux, Mask(16, 16, 1.0f));
  EXPECT_EQ(all.tactile.validity.count_nonzero(), 256u);
  EXPECT_EQ(all.vision.validity.count_nonzero(), 0u);

  const Mask m = straight_mask(4, 4, 16, 16);
  const SplitFields s = split_by_mask(mux, m);
  for (std::size_t i = 0; i < m.size(); ++i)
    EXPECT_EQ(s.tactile.validity.data()[i] + s.vision.validity.data()[i], 1.0f);
  EXPECT_TRUE(bit_equal(mask_blend(s.tactile.validity, s.tactile.values, s.vision.values), mux));
}

TEST(SplitByMask, RejectsNonBinaryMask) {
  EXPECT_THROW(split_by_mask(Image(4, 4, 3), Mask(4, 4, 0.5f)), ContractError);
  EXPECT_THROW(split_by_mask(Image(4, 4, 3), Mask(5, 4, 1.0f)), ShapeError);
}

TEST(InpaintNc, FullyValidIsUnchanged) {
  std::mt19937 rng(2);
  const Image img = random_image(rng, 12, 12, 3);
  for (auto order : {NcOrder::constant, NcOrder::linear})
    EXPECT_TRUE(bit_equal(inpaint_nc({img, Mask(12, 12, 1.0f)}, 2.0, 3, order), img));
}

TEST(InpaintNc, ConstantIsReproducedExactly) {
  std::mt19937 rng(3);
  for (auto order : {NcOrder::constant, NcOrder::linear})
    for (int trial = 0; trial < 5; ++trial) {
      const Mask valid = testing::random_mask(rng, 20, 14, true);
      Image img = constant_rgb(20, 14, 0.3f, 0.55f, 0.9f);
      for (std::size_t i = 0; i < valid.size(); ++i)
        if (valid.data()[i] == 0.0f)
          for (int c = 0; c < 3; ++c) img.plane(c)[i] = 0.0f;  // junk under invalid pixels
      const Image out = inpaint_nc({img, valid}, 1.5, 4, order);
      EXPECT_TRUE(bit_equal(out, constant_rgb(20, 14, 0.3f, 0.55f, 0.9f)));
    }
}

TEST(InpaintNc, LinearRampOnCheckerboard) {
  const int n = 64;
  Image ramp(n, n, 1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) ramp.at(x, y) = static_cast<float>(0.1 + 0.8 * (x + 0.5 * y) / (1.5 * n));
  const Mask vis = straight_mask(4, 4, n, n).complement();
  const Image out = inpaint_nc({ramp, vis}, 2.0, 10);
  double worst = 0.0;
  for (std::size_t i = 0; i < ramp.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(out.data()[i]) - ramp.data()[i]));
  EXPECT_LT(worst, 0.02);
}

TEST(InpaintNc, NothingValidIsAnError) {
  EXPECT_THROW(inpaint_nc({Image(4, 4, 1), Mask(4, 4)}, 1.0, 2), ContractError);
  EXPECT_THROW(inpaint_nc({Image(4, 4, 1), Mask(4, 4, 1.0f)}, 0.0, 2), ConfigError);
}

TEST(InpaintNc, KnownPixelsArePinned) {
  std::mt19937 rng(4);
  const Image img = random_image(rng, 24, 24, 3);
  const Mask valid = testing::random_mask(rng, 24, 24, true);
  const Image out = inpaint_nc({img, valid}, 2.0, 5);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < valid.size(); ++i)
      if (valid.data()[i] > 0.0f) { EXPECT_EQ(out.plane(c)[i], img.plane(c)[i]); }
}

struct ToyScene {
  Image t_bg, l_v, tactile, vision, mux, ref;
  Mask wavy;
};

ToyScene toy_scene(std::uint64_t seed, int grid, double amp, float tactile_gain) {
  const int n = 64;
  std::mt19937 rng(static_cast<unsigned>(seed));
  ToyScene s;
  s.t_bg = random_image(rng, n, n, 3, 0.3f, 0.6f);
  s.l_v = random_image(rng, n, n, 3, 0.5f, 1.0f);
  s.tactile = s.t_bg;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        s.tactile.at(x, y, c) = clamp_unit(s.t_bg.at(x, y, c) +
                                           tactile_gain * static_cast<float>(std::exp(-((x - 30) * (x - 30) + (y - 34) * (y - 34)) / 150.0)));
  s.vision = random_image(rng, n, n, 3);
  RandomStream wr(seed, "wavy");
  s.wavy = wavy_mask(sample_wavy_spec(grid, amp, amp, wr), n, n);
  s.mux = mask_blend(s.wavy, s.tactile, s.vision);
  s.ref = mask_blend(straight_mask(grid, grid, n, n), s.t_bg, s.l_v);
  return s;
}

TEST(Demux, ModePreconditions) {
  const ToyScene s = toy_scene(1, 4, 0.0, 0.2f);
  DemuxInputs in;
  in.i_mux = s.mux;
  in.grid = 4;
  EXPECT_THROW(demux(in, DemuxMode::di_abst), ContractError);
  in.i_ref = s.ref;
  EXPECT_THROW(demux(in, DemuxMode::si), ContractError);
  try {
    demux(in, DemuxMode::di_rest);
    FAIL() << "expected a ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("tactile background"), std::string::npos);
  }
  EXPECT_THROW(demux(in, DemuxMode::di_abst, MaskSource::provided), ContractError);
  in.grid = 0;
  EXPECT_THROW(demux(in, DemuxMode::di_abst), ContractError);
}

TEST(Demux, ConstantVisionIsExactInAllModes) {
  const int n = 64;
  std::mt19937 rng(5);
  const Image vision = constant_rgb(n, n, 0.25f, 0.5f, 0.75f);
  const Image tactile = random_image(rng, n, n, 3);
  const Mask stg = straight_mask(4, 4, n, n);
  DemuxInputs in;
  in.i_mux = mask_blend(stg, tactile, vision);
  in.grid = 4;
  EXPECT_TRUE(bit_equal(demux(in, DemuxMode::si).vision, vision));
  in.i_ref = mask_blend(stg, tactile, Image(n, n, 3, 1.0f));
  in.t_bg = tactile;
  EXPECT_TRUE(bit_equal(demux(in, DemuxMode::di_abst).vision, vision));
  EXPECT_TRUE(bit_equal(demux(in, DemuxMode::di_rest).vision, vision));
}

TEST(Demux, MuxEqualsRefGivesZeroResidual) {
  const int n = 64;
  std::mt19937 rng(6);
  const Image t_bg = random_image(rng, n, n, 3);
  const Image l_v = random_image(rng, n, n, 3);
  const Mask stg = straight_mask(4, 4, n, n);
  DemuxInputs in;
  in.i_ref = reference_image(stg, t_bg, l_v);
  in.i_mux = *in.i_ref;
  in.t_bg = t_bg;
  in.grid = 4;
  const DemuxResult r = demux(in, DemuxMode::di_rest);
  ASSERT_TRUE(r.residual.has_value());
  for (float v : r.residual->data()) EXPECT_NEAR(v, 0.0f, 1e-6);
  EXPECT_LT(testing::max_abs_diff(r.tactile, t_bg), 1e-6);
}

TEST(Demux, NativePixelsArePinnedInEveryMode) {
  const ToyScene s = toy_scene(7, 4, 3.0, 0.3f);
  for (auto mode : {DemuxMode::si, DemuxMode::di_abst, DemuxMode::di_rest})
    for (auto src : {MaskSource::nominal, MaskSource::provided}) {
      DemuxInputs in;
      in.i_mux = s.mux;
      in.grid = 4;
      in.true_mask = s.wavy;
      if (mode != DemuxMode::si) in.i_ref = s.ref;
      if (mode == DemuxMode::di_rest) in.t_bg = s.t_bg;
      const DemuxResult r = demux(in, mode, src);
      for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < r.mask.size(); ++i) {
          const float want = s.mux.plane(c)[i];
          if (r.mask.data()[i] > 0.5f) ASSERT_EQ(r.tactile.plane(c)[i], want);
          else ASSERT_EQ(r.vision.plane(c)[i], want);
        }
    }
}

TEST(Demux, ResidualBeatsAbsoluteOnTexturedBackground) {
  int wins = 0;
  const int trials = 20;
  for (int k = 0; k < trials; ++k) {
    const ToyScene s = toy_scene(100 + k, 4, 2.0, 0.15f);
    DemuxInputs in;
    in.i_mux = s.mux;
    in.i_ref = s.ref;
    in.t_bg = s.t_bg;
    in.true_mask = s.wavy;
    in.grid = 4;
    const double abs_err = rmse(demux(in, DemuxMode::di_abst, MaskSource::provided).tactile, s.tactile);
    const double res_err = rmse(demux(in, DemuxMode::di_rest, MaskSource::provided).tactile, s.tactile);
    wins += res_err <= abs_err ? 1 : 0;
  }
  EXPECT_GE(wins, trials * 9 / 10);
}

TEST(Demux, DefaultSigmaIsHalfACell) {
  EXPECT_DOUBLE_EQ(default_sigma(64, 64, 4), 8.0);
  EXPECT_DOUBLE_EQ(default_sigma(320, 240, 4), 30.0);
}

}  // namespace
}  // namespace muxgel
