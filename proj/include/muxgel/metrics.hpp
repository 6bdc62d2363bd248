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

// Image losses, quality metrics and the model-selection score.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "muxgel/error.hpp"
#include "muxgel/image.hpp"

namespace muxgel {

namespace detail {

inline void require_same_shape(const Image& a, const Image& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + "x" + std::to_string(a.channels()) + " vs " +
                     std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                     std::to_string(b.channels()) + ")");
}

}  // namespace detail

inline double l1(const Image& a, const Image& b) {
  detail::require_same_shape(a, b, "l1");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  return s / static_cast<double>(a.size());
}

inline double mse(const Image& a, const Image& b) {
  detail::require_same_shape(a, b, "mse");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

inline double rmse(const Image& a, const Image& b) { return std::sqrt(mse(a, b)); }

constexpr double kPsnrCapDb = 99.0;

/// Unit-range PSNR; zero error reports the 99 dB cap.
inline double psnr(const Image& a, const Image& b) {
  const double r = rmse(a, b);
  if (r == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, -20.0 * std::log10(r));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

namespace detail {

inline double ssim_from_moments(double ma, double mb, double va, double vb, double cov,
                                const SsimParams& p) {
  return ((2.0 * (ma * mb) + p.c1) * (2.0 * cov + p.c2)) /
         ((ma * ma + mb * mb + p.c1) * (va + vb + p.c2));
}

inline std::vector<double> ssim_window(const SsimParams& p) {
  std::vector<double> k(p.window);
  const int r = p.window / 2;
  double s = 0.0;
  for (int i = 0; i < p.window; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (p.sigma * p.sigma));
    s += k[i];
  }
  for (double& v : k) v /= s;
  return k;
}

// Correlates `in` with k (x) k over valid positions only.
inline std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                        const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Windowed SSIM averaged over valid windows and channels. Images smaller
/// than the window use one uniform window covering the whole image.
inline double ssim(const Image& a, const Image& b, const SsimParams& p = {}) {
  detail::require_same_shape(a, b, "ssim");
  const int w = a.width();
  const int h = a.height();
  if (a.size() == 0) throw ShapeError("ssim: empty image");
  double total = 0.0;
  if (w < p.window || h < p.window) {
    const double n = static_cast<double>(w) * h;
    for (int c = 0; c < a.channels(); ++c) {
      auto pa = a.plane(c);
      auto pb = b.plane(c);
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        ma += pa[i];
        mb += pb[i];
      }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < pa.size(); ++i) {
        va += (pa[i] - ma) * (pa[i] - ma);
        vb += (pb[i] - mb) * (pb[i] - mb);
        cov += (pa[i] - ma) * (pb[i] - mb);
      }
      total += detail::ssim_from_moments(ma, mb, va / n, vb / n, cov / n, p);
    }
    return total / a.channels();
  }
  const auto k = detail::ssim_window(p);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> xa(n), xb(n), aa(n), bb(n), ab(n);
  for (int c = 0; c < a.channels(); ++c) {
    auto pa = a.plane(c);
    auto pb = b.plane(c);
    for (std::size_t i = 0; i < n; ++i) {
      xa[i] = pa[i];
      xb[i] = pb[i];
      aa[i] = xa[i] * xa[i];
      bb[i] = xb[i] * xb[i];
      ab[i] = xa[i] * xb[i];
    }
    const auto ma = detail::filter_valid(xa, w, h, k);
    const auto mb = detail::filter_valid(xb, w, h, k);
    const auto saa = detail::filter_valid(aa, w, h, k);
    const auto sbb = detail::filter_valid(bb, w, h, k);
    const auto sab = detail::filter_valid(ab, w, h, k);
    double s = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = saa[i] - ma[i] * ma[i];
      const double vb = sbb[i] - mb[i] * mb[i];
      const double cov = sab[i] - ma[i] * mb[i];
      s += detail::ssim_from_moments(ma[i], mb[i], va, vb, cov, p);
    }
    total += s / static_cast<double>(ma.size());
  }
  return total / a.channels();
}

namespace detail {

// 3x3 Sobel responses of one plane, edges replicated.
inline void sobel(std::span<const float> in, int w, int h, std::vector<double>& gx,
                  std::vector<double>& gy) {
  gx.assign(in.size(), 0.0);
  gy.assign(in.size(), 0.0);
  auto px = [&](int x, int y) -> double {
    return in[static_cast<std::size_t>(clamp_index(y, h)) * w + clamp_index(x, w)];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
              (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      gy[i] = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
              (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
    }
}

}  // namespace detail

/// Mean absolute difference of Sobel-x and Sobel-y responses, over both
/// directions, all pixels and channels.
inline double grad_loss(const Image& a, const Image& b) {
  detail::require_same_shape(a, b, "grad_loss");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  std::vector<double> ax, ay, bx, by;
  for (int c = 0; c < a.channels(); ++c) {
    detail::sobel(a.plane(c), a.width(), a.height(), ax, ay);
    detail::sobel(b.plane(c), b.width(), b.height(), bx, by);
    for (std::size_t i = 0; i < ax.size(); ++i) s += std::abs(ax[i] - bx[i]) + std::abs(ay[i] - by[i]);
  }
  return s / (2.0 * static_cast<double>(a.size()));
}

/// Maps an image to a list of feature planes (one Image per level).
using FeatureExtractor = std::function<std::vector<Image>(const Image&)>;

/// Average pool with ceil-sized output; partial border blocks average the
/// pixels they cover.
inline Image average_pool(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("average_pool: factor must be >= 1");
  const int ow = (img.width() + factor - 1) / factor;
  const int oh = (img.height() + factor - 1) / factor;
  Image out(ow, oh, img.channels(), 0.0f, img.is_signed());
  for (int c = 0; c < img.channels(); ++c)
    for (int by = 0; by < oh; ++by)
      for (int bx = 0; bx < ow; ++bx) {
        double s = 0.0;
        int n = 0;
        for (int y = by * factor; y < std::min(img.height(), (by + 1) * factor); ++y)
          for (int x = bx * factor; x < std::min(img.width(), (bx + 1) * factor); ++x) {
            s += img.at(x, y, c);
            ++n;
          }
        out.at(bx, by, c) = static_cast<float>(s / n);
      }
  return out;
}

inline std::vector<Image> pyramid_features(const Image& img) {
  return {average_pool(img, 2), average_pool(img, 4), average_pool(img, 8)};
}

/// Sum over levels of the mean absolute feature difference.
inline double perceptual_loss(const Image& a, const Image& b,
                              const FeatureExtractor& extractor = pyramid_features) {
  detail::require_same_shape(a, b, "perceptual_loss");
  const auto fa = extractor(a);
  const auto fb = extractor(b);
  if (fa.size() != fb.size())
    throw ContractError("perceptual_loss: extractor produced " + std::to_string(fa.size()) +
                        " vs " + std::to_string(fb.size()) + " levels");
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (!fa[i].same_shape(fb[i]))
      throw ContractError("perceptual_loss: level " + std::to_string(i) + " shape mismatch");
    s += l1(fa[i], fb[i]);
  }
  return s;
}

struct LossWeights {
  double lambda_t = 1.0;
  double lambda_v = 1.0;
  double lambda_grad = 0.5;
  double lambda_ssim = 0.2;
  double lambda_perc = 0.1;

  void validate() const {
    for (double v : {lambda_t, lambda_v, lambda_grad, lambda_ssim, lambda_perc})
      if (!(v >= 0.0)) throw ConfigError("loss weights must be >= 0");
  }
};

enum class Stage { sim, real };

/// Every term of the staged objective; unused terms stay 0.
struct LossBreakdown {
  double l1_v = 0.0;
  double perc_v = 0.0;
  double l1_t = 0.0;
  double grad_t = 0.0;
  double ssim_t = 0.0;  // 1 - SSIM
  double perc_t = 0.0;
  double loss_v = 0.0;
  double loss_t = 0.0;
  double total = 0.0;
};

/// sim:  L_v = L1,            L_t = L1 + lg*grad
/// real: L_v = L1 + lp*perc,  L_t = L1 + lg*grad + ls*(1-SSIM) + lp*perc
/// total = lt*L_t + lv*L_v
inline LossBreakdown stage_loss(const Image& pred_v, const Image& gt_v, const Image& pred_t,
                                const Image& gt_t, Stage stage, const LossWeights& w = {},
                                const FeatureExtractor& extractor = pyramid_features) {
  w.validate();
  LossBreakdown b;
  b.l1_v = l1(pred_v, gt_v);
  b.l1_t = l1(pred_t, gt_t);
  b.grad_t = grad_loss(pred_t, gt_t);
  b.loss_v = b.l1_v;
  b.loss_t = b.l1_t + w.lambda_grad * b.grad_t;
  if (stage == Stage::real) {
    b.perc_v = perceptual_loss(pred_v, gt_v, extractor);
    b.perc_t = perceptual_loss(pred_t, gt_t, extractor);
    b.ssim_t = 1.0 - ssim(pred_t, gt_t);
    b.loss_v += w.lambda_perc * b.perc_v;
    b.loss_t += w.lambda_ssim * b.ssim_t + w.lambda_perc * b.perc_t;
  }
  b.total = w.lambda_t * b.loss_t + w.lambda_v * b.loss_v;
  return b;
}

struct ScoreWeights {
  double w_ts = 1.0;
  double w_tl = 0.8;
  double w_vs = 0.5;
  double w_vl = 0.4;
};

/// S = w_ts*SSIM_t - w_tl*LPIPS_t + w_vs*SSIM_v - w_vl*LPIPS_v
inline double selection_score(double ssim_t, double lpips_t, double ssim_v, double lpips_v,
                              const ScoreWeights& w = {}) {
  return w.w_ts * ssim_t - w.w_tl * lpips_t + w.w_vs * ssim_v - w.w_vl * lpips_v;
}

/// Per-modality quality of one reconstruction. LPIPS comes from outside;
/// the built-in pyramid distance is kept under a separate name.
struct ModalityMetrics {
  double rmse = 0.0;
  double one_minus_ssim = 0.0;
  double psnr = 0.0;
  std::optional<double> lpips;
  std::optional<double> pseudo_lpips;
};

inline ModalityMetrics measure(const Image& pred, const Image& truth, bool pseudo_lpips = false) {
  ModalityMetrics m;
  m.rmse = rmse(pred, truth);
  m.one_minus_ssim = 1.0 - ssim(pred, truth);
  m.psnr = m.rmse == 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, -20.0 * std::log10(m.rmse));
  if (pseudo_lpips) m.pseudo_lpips = perceptual_loss(pred, truth);
  return m;
}

struct MetricsReport {
  std::string name;
  ModalityMetrics tactile;
  ModalityMetrics vision;

  /// Needs both LPIPS values.
  std::optional<double> score(const ScoreWeights& w = {}) const {
    if (!tactile.lpips || !vision.lpips) return std::nullopt;
    return selection_score(1.0 - tactile.one_minus_ssim, *tactile.lpips,
                           1.0 - vision.one_minus_ssim, *vision.lpips, w);
  }
};

/// Field-wise mean; an optional field is averaged only when every report has it.
inline MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  MetricsReport out;
  out.name = "aggregate";
  if (reports.empty()) return out;
  const double n = static_cast<double>(reports.size());
  auto avg = [&](auto get) {
    double s = 0.0;
    for (const auto& r : reports) s += get(r);
    return s / n;
  };
  auto avg_opt = [&](auto get) -> std::optional<double> {
    double s = 0.0;
    for (const auto& r : reports) {
      const std::optional<double> v = get(r);
      if (!v) return std::nullopt;
      s += *v;
    }
    return s / n;
  };
  auto fill = [&](ModalityMetrics& m, auto pick) {
    m.rmse = avg([&](const MetricsReport& r) { return pick(r).rmse; });
    m.one_minus_ssim = avg([&](const MetricsReport& r) { return pick(r).one_minus_ssim; });
    m.psnr = avg([&](const MetricsReport& r) { return pick(r).psnr; });
    m.lpips = avg_opt([&](const MetricsReport& r) { return pick(r).lpips; });
    m.pseudo_lpips = avg_opt([&](const MetricsReport& r) { return pick(r).pseudo_lpips; });
  };
  fill(out.tactile, [](const MetricsReport& r) -> const ModalityMetrics& { return r.tactile; });
  fill(out.vision, [](const MetricsReport& r) -> const ModalityMetrics& { return r.vision; });
  return out;
}

}  // namespace muxgel
