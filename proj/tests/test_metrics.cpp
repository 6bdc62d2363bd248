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
#include <random>

#include "muxgel/metrics.hpp"
#include "test_support.hpp"

namespace muxgel {
namespace {

using testing::naive_ssim;
using testing::random_image;

TEST(L1, Examples) {
  std::mt19937 rng(1);
  const Image a = random_image(rng, 5, 5, 3);
  EXPECT_EQ(l1(a, a), 0.0);
  EXPECT_DOUBLE_EQ(l1(Image(4, 4, 3, 0.0f), Image(4, 4, 3, 1.0f)), 1.0);
  EXPECT_DOUBLE_EQ(l1(Image(4, 4, 3, 0.0f), Image(4, 4, 3, 0.25f)), 0.25);
  EXPECT_THROW(l1(Image(4, 4, 3), Image(4, 4, 1)), ShapeError);
}

TEST(RmsePsnr, Examples) {
  const Image z(8, 8, 3, 0.0f);
  EXPECT_EQ(rmse(z, z), 0.0);
  EXPECT_EQ(psnr(z, z), kPsnrCapDb);
  EXPECT_DOUBLE_EQ(rmse(z, Image(8, 8, 3, 1.0f)), 1.0);
  EXPECT_NEAR(psnr(z, Image(8, 8, 3, 1.0f)), 0.0, 1e-12);
  const Image tenth(8, 8, 3, 0.1f);
  EXPECT_NEAR(rmse(z, tenth), 0.1, 1e-8);
  EXPECT_NEAR(psnr(z, tenth), 20.0, 1e-6);
}

TEST(RmsePsnr, ConsistentOnRandomPairs) {
  std::mt19937 rng(2);
  for (int i = 0; i < 20; ++i) {
    const Image a = random_image(rng, 9, 7, 3);
    const Image b = random_image(rng, 9, 7, 3);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = static_cast<double>(a.data()[k]) - b.data()[k];
      s += d * d;
    }
    const double r = std::sqrt(s / a.size());
    EXPECT_NEAR(rmse(a, b), r, 1e-12);
    EXPECT_NEAR(psnr(a, b), -20.0 * std::log10(r), 1e-9);
    EXPECT_NEAR(mse(a, b), r * r, 1e-12);
  }
}

TEST(Ssim, MatchesNaiveOracle) {
  std::mt19937 rng(3);
  for (int i = 0; i < 10; ++i) {
    const Image a = random_image(rng, 16, 16, 3);
    Image b = a;
    std::normal_distribution<float> n(0.0f, 0.1f);
    for (float& v : b.data()) v = std::clamp(v + n(rng), 0.0f, 1.0f);
    EXPECT_NEAR(ssim(a, b), naive_ssim(a, b), 1e-6);
    const Image c = random_image(rng, 16, 16, 1);
    const Image d = random_image(rng, 16, 16, 1);
    EXPECT_NEAR(ssim(c, d), naive_ssim(c, d), 1e-6);
  }
}

TEST(Ssim, IdentityIsExactlyOne) {
  std::mt19937 rng(4);
  const Image a = random_image(rng, 20, 18, 3);
  EXPECT_EQ(ssim(a, a), 1.0);
  EXPECT_EQ(ssim(Image(16, 16, 3, 0.3f), Image(16, 16, 3, 0.3f)), 1.0);
  EXPECT_EQ(ssim(Image(16, 16, 1, 0.0f), Image(16, 16, 1, 0.0f)), 1.0);
  EXPECT_EQ(ssim(Image(5, 4, 3, 0.7f), Image(5, 4, 3, 0.7f)), 1.0);
}

TEST(Ssim, ConstantZeroVersusOne) {
  const double c1 = 1e-4;
  const double want = c1 / (1.0 + c1);
  EXPECT_NEAR(ssim(Image(16, 16, 3, 0.0f), Image(16, 16, 3, 1.0f)), want, 1e-12);
  EXPECT_NEAR(ssim(Image(6, 6, 3, 0.0f), Image(6, 6, 3, 1.0f)), want, 1e-12);
}

TEST(Ssim, IsSymmetric) {
  std::mt19937 rng(5);
  for (int i = 0; i < 10; ++i) {
    const Image a = random_image(rng, 24, 13, 3);
    const Image b = random_image(rng, 24, 13, 3);
    EXPECT_EQ(ssim(a, b), ssim(b, a));
  }
}

TEST(Ssim, SmallImageUsesUniformWindow) {
  std::mt19937 rng(6);
  const Image a = random_image(rng, 6, 5, 1);
  const Image b = random_image(rng, 6, 5, 1);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a.data()[i];
    mb += b.data()[i];
  }
  ma /= a.size();
  mb /= b.size();
  double va = 0, vb = 0, cov = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (a.data()[i] - ma) * (a.data()[i] - ma);
    vb += (b.data()[i] - mb) * (b.data()[i] - mb);
    cov += (a.data()[i] - ma) * (b.data()[i] - mb);
  }
  va /= a.size();
  vb /= a.size();
  cov /= a.size();
  const double want = ((2 * ma * mb + 1e-4) * (2 * cov + 9e-4)) / ((ma * ma + mb * mb + 1e-4) * (va + vb + 9e-4));
  EXPECT_NEAR(ssim(a, b), want, 1e-12);
}

TEST(GradLoss, ConstantsAndIdentity) {
  std::mt19937 rng(7);
  EXPECT_EQ(grad_loss(Image(8, 8, 3, 0.2f), Image(8, 8, 3, 0.9f)), 0.0);
  const Image a = random_image(rng, 8, 8, 3);
  EXPECT_EQ(grad_loss(a, a), 0.0);
}

TEST(GradLoss, StepEdgeMatchesDirectConvolution) {
  const int w = 10, h = 6;
  Image step(w, h, 1, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 5; x < w; ++x) step.at(x, y) = 1.0f;
  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  double s = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          gx += kx[dy + 1][dx + 1] * step.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1));
      s += std::abs(gx);
    }
  // Sobel-y of a vertical step is zero; the mean runs over both directions.
  EXPECT_NEAR(grad_loss(step, Image(w, h, 1, 0.0f)), s / (2.0 * w * h), 1e-12);
  EXPECT_NEAR(s, 2 * 4.0 * h, 1e-12);
}

TEST(PerceptualLoss, Examples) {
  std::mt19937 rng(8);
  const Image a = random_image(rng, 16, 16, 3);
  EXPECT_EQ(perceptual_loss(a, a), 0.0);
  EXPECT_NEAR(perceptual_loss(Image(16, 16, 3, 0.0f), Image(16, 16, 3, 1.0f)), 3.0, 1e-12);
}

TEST(PerceptualLoss, PoolingAveragesAwayAShift) {
  const int w = 64, h = 64;
  Image a(w, h, 1), b(w, h, 1);
  auto smooth = [](double x, double y) { return 0.5 + 0.4 * std::sin(x * 0.2) * std::cos(y * 0.15); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      a.at(x, y) = static_cast<float>(smooth(x, y));
      b.at(x, y) = static_cast<float>(smooth(x + 1, y));
    }
  const double pixel = l1(a, b);
  for (int factor : {2, 4, 8}) {
    const FeatureExtractor one = [factor](const Image& img) { return std::vector<Image>{average_pool(img, factor)}; };
    EXPECT_LT(perceptual_loss(a, b, one), pixel) << factor;
  }
}

TEST(PerceptualLoss, LevelMismatchIsContractError) {
  int calls = 0;
  const FeatureExtractor uneven = [&calls](const Image& img) {
    return ++calls == 1 ? std::vector<Image>{img} : std::vector<Image>{img, img};
  };
  EXPECT_THROW(perceptual_loss(Image(4, 4, 1), Image(4, 4, 1), uneven), ContractError);
}

TEST(AveragePool, CeilSizedBlocks) {
  Image img(5, 3, 1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) img.at(x, y) = static_cast<float>(x + 10 * y);
  const Image p = average_pool(img, 2);
  ASSERT_EQ(p.width(), 3);
  ASSERT_EQ(p.height(), 2);
  EXPECT_FLOAT_EQ(p.at(0, 0), (0 + 1 + 10 + 11) / 4.0f);
  EXPECT_FLOAT_EQ(p.at(2, 0), (4 + 14) / 2.0f);
  EXPECT_FLOAT_EQ(p.at(2, 1), 24.0f);
}

TEST(StageLoss, Examples) {
  std::mt19937 rng(9);
  const Image v = random_image(rng, 16, 16, 3);
  const Image t = random_image(rng, 16, 16, 3);
  const LossBreakdown zero = stage_loss(v, v, t, t, Stage::real);
  EXPECT_EQ(zero.total, 0.0);
  EXPECT_EQ(zero.l1_v + zero.perc_v + zero.l1_t + zero.grad_t + zero.ssim_t + zero.perc_t, 0.0);

  LossWeights w;
  w.lambda_grad = 0.0;
  const Image z(16, 16, 3, 0.5f), e(16, 16, 3, 0.6f);
  const LossBreakdown sim = stage_loss(e, z, e, z, Stage::sim, w);
  EXPECT_NEAR(sim.total, 0.2, 1e-6);

  Image noisy = t;
  for (std::size_t i = 0; i < noisy.size(); i += 3) noisy.data()[i] = 1.0f - noisy.data()[i];
  const LossBreakdown s = stage_loss(noisy, t, noisy, t, Stage::sim);
  const LossBreakdown r = stage_loss(noisy, t, noisy, t, Stage::real);
  EXPECT_GE(r.total, s.total);
  EXPECT_NEAR(r.total, r.loss_t + r.loss_v, 1e-12);
  const LossWeights d;
  EXPECT_NEAR(r.loss_t, r.l1_t + d.lambda_grad * r.grad_t + d.lambda_ssim * r.ssim_t + d.lambda_perc * r.perc_t,
              1e-12);
  EXPECT_NEAR(r.loss_v, r.l1_v + d.lambda_perc * r.perc_v, 1e-12);

  LossWeights neg;
  neg.lambda_ssim = -1.0;
  EXPECT_THROW(stage_loss(v, v, t, t, Stage::real, neg), ConfigError);
}

TEST(SelectionScore, Examples) {
  EXPECT_DOUBLE_EQ(selection_score(1, 0, 1, 0), 1.5);
  EXPECT_EQ(selection_score(0, 0, 0, 0), 0.0);
  EXPECT_NEAR(selection_score(0.9122, 0.0489, 0.6902, 0.3232), 1.0889, 5e-5);
  EXPECT_DOUBLE_EQ(selection_score(0.3, 0.9, 0.7, 0.2, {0, 0, 1, 0}), 0.7);
}

TEST(Measure, ReportForIdenticalImages) {
  std::mt19937 rng(10);
  const Image a = random_image(rng, 16, 16, 3);
  const ModalityMetrics m = measure(a, a, true);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.one_minus_ssim, 0.0);
  EXPECT_EQ(m.psnr, kPsnrCapDb);
  EXPECT_FALSE(m.lpips.has_value());
  ASSERT_TRUE(m.pseudo_lpips.has_value());
  EXPECT_EQ(*m.pseudo_lpips, 0.0);
  EXPECT_FALSE(measure(a, a).pseudo_lpips.has_value());
}

TEST(MeanReport, AveragesFields) {
  MetricsReport a, b;
  a.tactile = {0.1, 0.2, 20.0, 0.3, std::nullopt};
  b.tactile = {0.3, 0.4, 10.0, 0.5, std::nullopt};
  a.vision = {0.2, 0.1, 14.0, std::nullopt, 0.5};
  b.vision = {0.4, 0.3, 8.0, std::nullopt, 0.7};
  const MetricsReport m = mean_report({a, b});
  EXPECT_NEAR(m.tactile.rmse, 0.2, 1e-12);
  EXPECT_NEAR(m.tactile.psnr, 15.0, 1e-12);
  EXPECT_NEAR(*m.tactile.lpips, 0.4, 1e-12);
  EXPECT_FALSE(m.vision.lpips.has_value());
  EXPECT_NEAR(*m.vision.pseudo_lpips, 0.6, 1e-12);
  EXPECT_FALSE(m.score().has_value());
}

}  // namespace
}  // namespace muxgel
