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

// Training-free demultiplexing: split the observation by mask, fill each
// modality by normalized convolution.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "muxgel/error.hpp"
#include "muxgel/image.hpp"
#include "muxgel/pipeline.hpp"

namespace muxgel {

enum class DemuxMode { si, di_abst, di_rest };

inline std::string_view to_string(DemuxMode m) {
  switch (m) {
    case DemuxMode::si: return "si";
    case DemuxMode::di_abst: return "di-abst";
    case DemuxMode::di_rest: return "di-rest";
  }
  return "?";
}

inline DemuxMode parse_demux_mode(std::string_view s) {
  if (s == "si") return DemuxMode::si;
  if (s == "di-abst") return DemuxMode::di_abst;
  if (s == "di-rest") return DemuxMode::di_rest;
  throw ConfigError("unknown demux mode '" + std::string(s) + "' (expected si, di-abst, di-rest)");
}

enum class MaskSource { nominal, provided };

inline MaskSource parse_mask_source(std::string_view s) {
  if (s == "nominal") return MaskSource::nominal;
  if (s == "provided") return MaskSource::provided;
  throw ConfigError("unknown mask source '" + std::string(s) + "' (expected nominal, provided)");
}

/// Values are meaningful only where validity is 1.
struct SparseField {
  Image values;
  Mask validity;
};

struct SplitFields {
  SparseField tactile;
  SparseField vision;
};

inline SplitFields split_by_mask(const Image& i_mux, const Mask& m) {
  if (!m.same_size(i_mux)) throw ShapeError("split_by_mask: mask and image differ in size");
  if (!m.is_binary()) throw ContractError("split_by_mask: mask is not binary");
  return {{i_mux, m}, {i_mux, m.complement()}};
}

enum class NcOrder { constant, linear };

namespace detail {

// Gaussian-weighted moments of the certainty around each pixel, offsets in
// pixels relative to the pixel itself. Border::zero keeps the outside at zero
// certainty.
struct NcMoments {
  std::vector<double> s0, sx, sy, sxx, sxy, syy;
};

inline std::vector<double> blur_zero(const std::vector<double>& in, int w, int h,
                                     const std::vector<double>& k) {
  return separable_filter(in, w, h, k, k, Border::zero);
}

}  // namespace detail

/// Iterative normalized convolution. The linear order fits a local plane
/// (value plus gradient) and accepts a pixel once its weighted support is
/// well conditioned in both directions; the remaining pixels wait for a
/// later pass. The constant order is the classical ratio of blurred
/// value*certainty over blurred certainty. Known pixels are pinned.
inline Image inpaint_nc(const SparseField& sparse, double sigma, int iterations,
                        NcOrder order = NcOrder::linear) {
  const Image& src = sparse.values;
  const Mask& valid = sparse.validity;
  if (!valid.same_size(src)) throw ShapeError("inpaint_nc: validity and values differ in size");
  if (!(sigma > 0.0)) throw ConfigError("inpaint_nc: sigma must be > 0");
  if (iterations < 1) throw ConfigError("inpaint_nc: iterations must be >= 1");
  if (valid.count_nonzero() == 0) throw ContractError("inpaint_nc: no valid pixels to propagate");

  const int w = src.width();
  const int h = src.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const auto k = detail::gaussian_kernel(sigma);
  constexpr double kMinSupport = 1e-9;
  constexpr double kMinEigen = 0.25;  // px^2

  std::vector<double> cert(n);
  std::vector<char> known(n), filled(n);
  for (std::size_t i = 0; i < n; ++i) {
    known[i] = valid.data()[i] > 0.5f;
    filled[i] = known[i];
    cert[i] = known[i] ? 1.0 : 0.0;
  }
  std::vector<std::vector<double>> val(src.channels(), std::vector<double>(n));
  for (int c = 0; c < src.channels(); ++c) {
    auto p = src.plane(c);
    for (std::size_t i = 0; i < n; ++i) val[c][i] = known[i] ? p[i] : 0.0;
  }

  std::vector<double> xs(n), ys(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      xs[static_cast<std::size_t>(y) * w + x] = x;
      ys[static_cast<std::size_t>(y) * w + x] = y;
    }

  auto pass = [&](NcOrder ord) {
    std::vector<double> tmp(n);
    auto prod = [&](auto f) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = f(i);
      return detail::blur_zero(tmp, w, h, k);
    };
    const auto s0 = prod([&](std::size_t i) { return cert[i]; });
    std::vector<double> sx, sy, sxx, sxy, syy;
    if (ord == NcOrder::linear) {
      sx = prod([&](std::size_t i) { return cert[i] * xs[i]; });
      sy = prod([&](std::size_t i) { return cert[i] * ys[i]; });
      sxx = prod([&](std::size_t i) { return cert[i] * xs[i] * xs[i]; });
      sxy = prod([&](std::size_t i) { return cert[i] * xs[i] * ys[i]; });
      syy = prod([&](std::size_t i) { return cert[i] * ys[i] * ys[i]; });
    }
    // Gate once per pass; the geometry is shared by all channels.
    std::vector<char> accept(n, 0);
    std::vector<double> mx(n), my(n), cxx(n), cxy(n), cyy(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (known[i] || s0[i] <= kMinSupport) continue;
      if (ord == NcOrder::constant) {
        accept[i] = 1;
        continue;
      }
      mx[i] = sx[i] / s0[i];
      my[i] = sy[i] / s0[i];
      cxx[i] = sxx[i] / s0[i] - mx[i] * mx[i];
      cxy[i] = sxy[i] / s0[i] - mx[i] * my[i];
      cyy[i] = syy[i] / s0[i] - my[i] * my[i];
      const double tr = 0.5 * (cxx[i] + cyy[i]);
      const double disc = std::sqrt(std::max(0.0, 0.25 * (cxx[i] - cyy[i]) * (cxx[i] - cyy[i]) + cxy[i] * cxy[i]));
      accept[i] = tr - disc >= kMinEigen;
    }
    std::vector<std::vector<double>> next = val;
    for (int c = 0; c < src.channels(); ++c) {
      const auto& v = val[c];
      const auto f0 = prod([&](std::size_t i) { return cert[i] * v[i]; });
      std::vector<double> fx, fy;
      if (ord == NcOrder::linear) {
        fx = prod([&](std::size_t i) { return cert[i] * v[i] * xs[i]; });
        fy = prod([&](std::size_t i) { return cert[i] * v[i] * ys[i]; });
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!accept[i]) continue;
        const double mf = f0[i] / s0[i];
        if (ord == NcOrder::constant) {
          next[c][i] = mf;
          continue;
        }
        const double bx = fx[i] / s0[i] - mf * mx[i];
        const double by = fy[i] / s0[i] - mf * my[i];
        const double det = cxx[i] * cyy[i] - cxy[i] * cxy[i];
        const double gx = (cyy[i] * bx - cxy[i] * by) / det;
        const double gy = (cxx[i] * by - cxy[i] * bx) / det;
        next[c][i] = mf + gx * (xs[i] - mx[i]) + gy * (ys[i] - my[i]);
      }
    }
    val = std::move(next);
    bool progress = false;
    for (std::size_t i = 0; i < n; ++i)
      if (accept[i]) {
        progress |= !filled[i];
        filled[i] = 1;
        cert[i] = 1.0;
      }
    return progress;
  };

  for (int it = 0; it < iterations; ++it) pass(order);
  // Whatever the gate left behind is filled by constant-order passes.
  while (std::count(filled.begin(), filled.end(), 0) > 0) {
    if (!pass(NcOrder::constant)) throw ContractError("inpaint_nc: propagation stalled");
  }

  Image out(w, h, src.channels(), 0.0f, src.is_signed());
  const double lo = src.is_signed() ? -1.0 : 0.0;
  for (int c = 0; c < src.channels(); ++c) {
    auto po = out.plane(c);
    auto ps = src.plane(c);
    for (std::size_t i = 0; i < n; ++i)
      po[i] = known[i] ? ps[i] : static_cast<float>(std::clamp(val[c][i], lo, 1.0));
  }
  return out;
}

/// Everything a reconstruction may consume; which members are required
/// depends on the mode.
struct DemuxInputs {
  Image i_mux;
  std::optional<Image> i_ref;
  std::optional<Image> t_bg;       // jittered no-contact tactile background
  std::optional<Mask> true_mask;   // the wavy mask, for MaskSource::provided
  int grid = 0;                    // checkerboard cells per side
};

struct DemuxParams {
  double sigma_px = 0.0;  // 0: half a cell
  int iterations = 8;
  NcOrder order = NcOrder::linear;
};

struct DemuxResult {
  Image vision;
  Image tactile;
  std::optional<Image> residual;  // signed; present when a background is known
  Mask mask;                      // the attribution actually used
};

inline double default_sigma(int width, int height, int grid) {
  return 0.5 * static_cast<double>(std::min(width, height)) / grid;
}

inline DemuxResult demux(const DemuxInputs& in, DemuxMode mode,
                         MaskSource mask_source = MaskSource::nominal, const DemuxParams& params = {}) {
  const int w = in.i_mux.width();
  const int h = in.i_mux.height();
  if (in.grid < 1) throw ContractError("demux: grid size is required");
  if (mode == DemuxMode::si && in.i_ref)
    throw ContractError("demux: si mode takes no reference image");
  if (mode != DemuxMode::si && !in.i_ref)
    throw ContractError("demux: " + std::string(to_string(mode)) + " requires the reference image");
  if (mode == DemuxMode::di_rest && !in.t_bg)
    throw ContractError("demux: di-rest requires the tactile background");
  if (in.i_ref && !in.i_ref->same_shape(in.i_mux)) throw ShapeError("demux: reference shape mismatch");
  if (in.t_bg && !in.t_bg->same_shape(in.i_mux)) throw ShapeError("demux: background shape mismatch");

  Mask m;
  if (mask_source == MaskSource::provided) {
    if (!in.true_mask) throw ContractError("demux: provided mask source but no mask given");
    m = *in.true_mask;
  } else {
    m = straight_mask(in.grid, in.grid, w, h);
  }
  const double sigma = params.sigma_px > 0.0 ? params.sigma_px : default_sigma(w, h, in.grid);

  SplitFields split = split_by_mask(in.i_mux, m);
  DemuxResult out;
  out.mask = m;
  out.vision = m.count_nonzero() == m.size()
                   ? in.i_mux
                   : inpaint_nc(split.vision, sigma, params.iterations, params.order);

  if (mode == DemuxMode::di_rest) {
    const Image& ref = *in.i_ref;
    const Image& bg = *in.t_bg;
    // Under the straight layout the reference holds the background on its
    // own tactile cells; a wavy attribution reaches past them.
    const Mask stg = straight_mask(in.grid, in.grid, w, h);
    Image diff(w, h, in.i_mux.channels(), 0.0f, true);
    for (int c = 0; c < diff.channels(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double base = stg.at(x, y) > 0.5f ? ref.at(x, y, c) : bg.at(x, y, c);
          diff.at(x, y, c) = static_cast<float>(in.i_mux.at(x, y, c) - base);
        }
    const Image res = inpaint_nc({diff, m}, sigma, params.iterations, params.order);
    Image tac(w, h, in.i_mux.channels());
    for (int c = 0; c < tac.channels(); ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          tac.at(x, y, c) = m.at(x, y) > 0.5f
                                ? in.i_mux.at(x, y, c)
                                : clamp_unit(static_cast<float>(static_cast<double>(bg.at(x, y, c)) + res.at(x, y, c)));
    out.tactile = std::move(tac);
    out.residual = res;
  } else {
    out.tactile = m.count_nonzero() == 0
                      ? in.i_mux
                      : inpaint_nc(split.tactile, sigma, params.iterations, params.order);
    if (in.t_bg) {
      Image res(w, h, in.i_mux.channels(), 0.0f, true);
      for (std::size_t i = 0; i < res.size(); ++i)
        res.data()[i] = out.tactile.data()[i] - in.t_bg->data()[i];
      out.residual = std::move(res);
    }
  }
  return out;
}

}  // namespace muxgel
