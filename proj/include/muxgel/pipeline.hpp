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

// Compositing pipeline that turns a procedural contact scene into one
// multiplexed sensor observation plus its reference image and targets.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "muxgel/error.hpp"
#include "muxgel/image.hpp"
#include "muxgel/image_io.hpp"
#include "muxgel/random.hpp"
#include "muxgel/tactile.hpp"

namespace muxgel {

// ---------------------------------------------------------------------------
// Per-pixel operations

/// 1 where the object is absent: depth beyond `depth_threshold` and mean
/// foreground intensity below `intensity_threshold`. A 3x3 closing removes
/// speckle.
inline Mask background_mask(const HeightField& depth, const Image& intensity,
                            double depth_threshold, double intensity_threshold) {
  detail::require_same_size(depth.width(), depth.height(), intensity.width(),
                            intensity.height(), "background_mask");
  const int w = depth.width();
  const int h = depth.height();
  Mask raw(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mean = 0.0;
      for (int c = 0; c < intensity.channels(); ++c) mean += intensity.at(x, y, c);
      mean /= intensity.channels();
      raw.at(x, y) = (depth.at(x, y) > depth_threshold && mean < intensity_threshold) ? 1.0f : 0.0f;
    }
  }
  auto morph = [w, h](const Mask& in, bool dilate) {
    Mask out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float v = in.at(x, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const float q = in.at(detail::clamp_index(x + dx, w), detail::clamp_index(y + dy, h));
            v = dilate ? std::max(v, q) : std::min(v, q);
          }
        out.at(x, y) = v;
      }
    return out;
  };
  return morph(morph(raw, true), false);
}

/// Background fusion: mask_blend(m_bg, v_bg, v_obj).
inline Image compose_raw_vision(const Image& v_bg, const Image& v_obj, const Mask& m_bg) {
  return mask_blend(m_bg, v_bg, v_obj);
}

/// Contact-induced difference from the no-contact background; signed, unclamped.
inline Image tactile_diff(const Image& t_raw, const Image& t_org_bg) {
  if (!t_raw.same_shape(t_org_bg)) throw ShapeError("tactile_diff: shape mismatch");
  Image out(t_raw.width(), t_raw.height(), t_raw.channels(), 0.0f, true);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = t_raw.data()[i] - t_org_bg.data()[i];
  return out;
}

struct SaturationStats {
  std::size_t clamped = 0;
};

/// Residual added back onto the jittered tactile background, clamped to [0,1].
inline Image residual_tactile(const Image& t_diff, const Image& t_bg_jit,
                              SaturationStats* stats = nullptr) {
  if (!t_diff.same_shape(t_bg_jit)) throw ShapeError("residual_tactile: shape mismatch");
  Image out(t_bg_jit.width(), t_bg_jit.height(), t_bg_jit.channels());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = t_diff.data()[i] + t_bg_jit.data()[i];
    const float c = clamp_unit(v);
    clamped += c != v ? 1 : 0;
    out.data()[i] = c;
  }
  if (stats) stats->clamped += clamped;
  return out;
}

/// Shared-optics relighting: contact pixels take the tactile image as gain,
/// others the pure-vision light map.
inline Image relight(const Image& v_jit, const Image& t_jit, const Image& l_v, const Mask& m_c) {
  return mask_blend(m_c, hadamard(v_jit, t_jit), hadamard(v_jit, l_v));
}

/// Multiplexed observation: tactile under the coated cells, vision elsewhere.
inline Image multiplex(const Mask& m_wavy, const Image& t_jit, const Image& v_relit) {
  return mask_blend(m_wavy, t_jit, v_relit);
}

/// Ideal no-contact layout under the straight mask.
inline Image reference_image(const Mask& m_stg, const Image& t_bg_jit, const Image& l_v) {
  return mask_blend(m_stg, t_bg_jit, l_v);
}

struct ContactDecision {
  bool accepted = false;
  double ratio = 0.0;
};

inline ContactDecision contact_ratio_filter(const Mask& m_c, double threshold = 0.05) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("contact threshold must lie in (0,1)");
  const double r = m_c.mean();
  return {r > threshold, r};
}

// ---------------------------------------------------------------------------
// Correlated colour jitter

struct JitterParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_deg = 0.0;

  bool is_identity() const {
    return brightness == 1.0 && contrast == 1.0 && saturation == 1.0 && hue_deg == 0.0;
  }
};

namespace detail {

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) h = std::fmod((g - b) / d, 6.0);
  else if (mx == g) h = (b - r) / d + 2.0;
  else h = (r - g) / d + 4.0;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace detail

/// brightness -> contrast (pivot 0.5) -> saturation (blend with Rec.601 luma)
/// -> hue (HSV rotation), clamping after each step. Identity steps are
/// skipped so identity parameters reproduce the input bit-for-bit.
inline Image apply_jitter(const JitterParams& p, const Image& img) {
  Image out = img;
  auto& d = out.data();
  if (p.brightness != 1.0) {
    const float b = static_cast<float>(p.brightness);
    for (float& v : d) v = clamp_unit(v * b);
  }
  if (p.contrast != 1.0) {
    const float c = static_cast<float>(p.contrast);
    for (float& v : d) v = clamp_unit((v - 0.5f) * c + 0.5f);
  }
  if (img.channels() != 3) return out;
  auto r = out.plane(0);
  auto g = out.plane(1);
  auto b = out.plane(2);
  if (p.saturation != 1.0) {
    const float s = static_cast<float>(p.saturation);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const float luma = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
      r[i] = clamp_unit(luma + s * (r[i] - luma));
      g[i] = clamp_unit(luma + s * (g[i] - luma));
      b[i] = clamp_unit(luma + s * (b[i] - luma));
    }
  }
  if (p.hue_deg != 0.0) {
    const double shift = p.hue_deg / 360.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double h, s, v, rr, gg, bb;
      detail::rgb_to_hsv(r[i], g[i], b[i], h, s, v);
      detail::hsv_to_rgb(h + shift, s, v, rr, gg, bb);
      r[i] = clamp_unit(static_cast<float>(rr));
      g[i] = clamp_unit(static_cast<float>(gg));
      b[i] = clamp_unit(static_cast<float>(bb));
    }
  }
  return out;
}

/// The same parameter set applied to every image.
inline std::vector<Image> correlated_jitter(const JitterParams& p, const std::vector<Image>& images) {
  if (images.empty()) throw ConfigError("correlated_jitter: no images");
  std::vector<Image> out;
  out.reserve(images.size());
  for (const Image& img : images) out.push_back(apply_jitter(p, img));
  return out;
}

// ---------------------------------------------------------------------------
// Checkerboard masks

/// Sinusoidally displaced boundary position at normalized arclength t.
inline double wavy_boundary(double p_base, double amplitude, double frequency, double phase,
                            double t) {
  return p_base + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
}

struct BoundaryWave {
  double amplitude = 0.0;  // pixels
  double frequency = 1.0;  // cycles per boundary length
  double phase = 0.0;      // radians
};

/// Square checkerboard of `grid` x `grid` cells whose interior boundaries are
/// perturbed independently: vertical[k-1] displaces the vertical line k along
/// the image height, horizontal[k-1] the horizontal line k along the width.
struct WavySpec {
  int grid = 4;
  std::vector<BoundaryWave> vertical;
  std::vector<BoundaryWave> horizontal;

  static WavySpec straight(int grid) {
    WavySpec s;
    s.grid = grid;
    s.vertical.assign(grid > 0 ? grid - 1 : 0, BoundaryWave{});
    s.horizontal.assign(grid > 0 ? grid - 1 : 0, BoundaryWave{});
    return s;
  }
};

constexpr double kMaxWaveAmplitudePx = 5.0;
constexpr int kMinCellPx = 4;

inline int cell_edge(int k, int extent, int cells) {
  return static_cast<int>(std::lround(static_cast<double>(k) * extent / cells));
}

/// Axis-aligned checkerboard; the top-left cell is tactile (1).
inline Mask straight_mask(int rows, int cols, int width, int height) {
  if (rows < 1 || cols < 1) throw ConfigError("straight_mask: grid must be at least 1x1");
  Mask m(width, height);
  std::vector<int> col_of(width), row_of(height);
  for (int c = 0; c < cols; ++c)
    for (int x = cell_edge(c, width, cols); x < cell_edge(c + 1, width, cols); ++x) col_of[x] = c;
  for (int r = 0; r < rows; ++r)
    for (int y = cell_edge(r, height, rows); y < cell_edge(r + 1, height, rows); ++y) row_of[y] = r;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) m.at(x, y) = (row_of[y] + col_of[x]) % 2 == 0 ? 1.0f : 0.0f;
  return m;
}

/// Draws an independent (A, f, phi) per interior boundary: A uniform on the
/// amplitude range, f uniform on {1,2,3}, phi uniform on [0, 2pi).
inline WavySpec sample_wavy_spec(int grid, double amp_lo, double amp_hi, RandomStream& rng) {
  if (grid < 2 || grid > 8) throw ConfigError("wavy grid must lie in [2,8]");
  if (amp_lo < 0.0 || amp_hi > kMaxWaveAmplitudePx || amp_lo > amp_hi)
    throw ConfigError("wave amplitude range must lie in [0,5] px");
  WavySpec s = WavySpec::straight(grid);
  auto draw = [&](BoundaryWave& b) {
    b.amplitude = rng.uniform(amp_lo, amp_hi);
    b.frequency = static_cast<double>(rng.uniform_int(1, 3));
    b.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  };
  for (auto& b : s.vertical) draw(b);
  for (auto& b : s.horizontal) draw(b);
  return s;
}

inline Mask wavy_mask(const WavySpec& spec, int width, int height) {
  const int n = spec.grid;
  if (n < 1) throw ConfigError("wavy_mask: grid must be positive");
  if (width / n < kMinCellPx || height / n < kMinCellPx)
    throw ConfigError("wavy_mask: " + std::to_string(n) + "x" + std::to_string(n) +
                      " grid too fine for " + std::to_string(width) + "x" +
                      std::to_string(height) + " pixels");
  if (static_cast<int>(spec.vertical.size()) != n - 1 ||
      static_cast<int>(spec.horizontal.size()) != n - 1)
    throw ConfigError("wavy_mask: boundary count does not match grid");
  for (const auto* list : {&spec.vertical, &spec.horizontal})
    for (const BoundaryWave& b : *list)
      if (b.amplitude < 0.0 || b.amplitude > kMaxWaveAmplitudePx)
        throw ConfigError("wavy_mask: amplitude outside [0,5] px");

  // Column index of pixel x on row y: number of vertical boundaries at or
  // left of the pixel centre; rows likewise.
  std::vector<double> vpos(static_cast<std::size_t>(n - 1) * height);
  for (int k = 1; k < n; ++k) {
    const BoundaryWave& b = spec.vertical[k - 1];
    const double base = cell_edge(k, width, n);
    for (int y = 0; y < height; ++y)
      vpos[static_cast<std::size_t>(k - 1) * height + y] =
          wavy_boundary(base, b.amplitude, b.frequency, b.phase, (y + 0.5) / height);
  }
  std::vector<double> hpos(static_cast<std::size_t>(n - 1) * width);
  for (int k = 1; k < n; ++k) {
    const BoundaryWave& b = spec.horizontal[k - 1];
    const double base = cell_edge(k, height, n);
    for (int x = 0; x < width; ++x)
      hpos[static_cast<std::size_t>(k - 1) * width + x] =
          wavy_boundary(base, b.amplitude, b.frequency, b.phase, (x + 0.5) / width);
  }
  Mask m(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int col = 0, row = 0;
      for (int k = 0; k < n - 1; ++k) {
        if (x + 0.5 >= vpos[static_cast<std::size_t>(k) * height + y]) ++col;
        if (y + 0.5 >= hpos[static_cast<std::size_t>(k) * width + x]) ++row;
      }
      m.at(x, y) = (row + col) % 2 == 0 ? 1.0f : 0.0f;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Generation configuration

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double sample(RandomStream& rng) const { return rng.uniform(lo, hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// One entry of the indenter pool; each size parameter is drawn from its range.
struct IndenterPoolEntry {
  IndenterShape shape = IndenterShape::sphere;
  Range radius_mm{3.0, 5.0};
  Range inner_radius_mm{1.5, 2.5};
  Range side_mm{4.0, 8.0};
  Range half_angle_deg{20.0, 40.0};
  Range length_mm{6.0, 12.0};
};

inline std::vector<IndenterPoolEntry> default_indenter_pool() {
  std::vector<IndenterPoolEntry> pool;
  for (auto s : {IndenterShape::sphere, IndenterShape::edge, IndenterShape::square,
                 IndenterShape::solid_octagon, IndenterShape::hollow_octagon}) {
    IndenterPoolEntry e;
    e.shape = s;
    if (s == IndenterShape::hollow_octagon) e.radius_mm = {3.5, 5.0};
    pool.push_back(e);
  }
  return pool;
}

struct JitterRanges {
  Range brightness{0.7, 1.3};
  Range contrast{0.7, 1.3};
  Range saturation{0.7, 1.3};
  Range hue_deg{-18.0, 18.0};

  JitterParams sample(RandomStream& rng) const {
    JitterParams p;
    p.brightness = brightness.sample(rng);
    p.contrast = contrast.sample(rng);
    p.saturation = saturation.sample(rng);
    p.hue_deg = hue_deg.sample(rng);
    return p;
  }
};

enum class ImageSource { procedural, constant, directory };

struct BackgroundConfig {
  ImageSource source = ImageSource::procedural;
  Rgb color{0.5f, 0.5f, 0.5f};  // constant source
  std::string path;             // directory source
};

/// Stand-in for captured no-contact tactile frames: the rendered base colour
/// under a random smooth illumination gain plus gel grain, or PNGs from a
/// directory.
struct TactileBackgroundConfig {
  ImageSource source = ImageSource::procedural;
  std::string path;
  double gain_variation = 0.12;
  double grain = 0.01;
};

struct ObjectConfig {
  std::vector<Rgb> colors{{0.92f, 0.92f, 0.9f}, {0.08f, 0.08f, 0.08f}, {0.85f, 0.15f, 0.12f},
                          {0.15f, 0.7f, 0.2f},   {0.12f, 0.2f, 0.85f}};
  double texture = 0.15;  // amplitude of the surface pattern
  double shading = 0.3;   // darkening towards the silhouette
  double reach_mm = 3.0;  // visible height of the indenter above its tip
};

struct LightMapConfig {
  double vignette_exponent = 2.0;
  double edge_attenuation = 0.6;
  std::string file;
};

struct CalibrationConfig {
  int magnitude_bins = 24;
  int angle_bins = 32;
  std::string file;
};

struct GenConfig {
  SensorGeometry sensor;
  double camera_distance_mm = 14.0;
  std::vector<IndenterPoolEntry> indenters = default_indenter_pool();
  std::vector<std::array<double, 2>> positions_mm{{0.0, 0.0}, {0.0, -6.4}, {0.0, 6.4},
                                                  {5.2, 0.0}, {-5.2, 0.0}};
  double position_jitter_mm = 0.0;
  Range press_depth_mm{0.01, 1.5};
  std::array<int, 2> grid{2, 8};
  Range amplitude_px{0.0, 5.0};
  JitterRanges jitter;
  BackgroundConfig background;
  Range blur_radius_px{3.0, 9.0};
  double contact_threshold = 0.05;
  double smoothing_sigma_mm = 0.3;
  CalibrationConfig calibration;
  ShadowParams shadow;
  LightMapConfig light_map;
  TactileBackgroundConfig tactile_background;
  ObjectConfig object;
  std::size_t count = 0;
  std::optional<std::uint64_t> seed;
  int max_attempts = 200;

  struct Issue {
    std::string path;  // JSON pointer of the offending field
    std::string message;
  };

  /// First semantic problem, if any. Shared by the JSON loader (which maps
  /// the path to a source line) and programmatic callers.
  std::optional<Issue> check() const {
    auto bad = [](std::string path, std::string msg) { return std::optional<Issue>(Issue{std::move(path), std::move(msg)}); };
    auto ordered = [](const Range& r) { return r.lo <= r.hi; };
    if (!(sensor.width_mm > 0 && sensor.height_mm > 0 && sensor.mm_per_px > 0))
      return bad("/sensor", "sensor dimensions must be positive");
    if (sensor.width_px() < 8 || sensor.height_px() < 8)
      return bad("/sensor", "sensor grid must be at least 8x8 pixels");
    if (!(camera_distance_mm > 0)) return bad("/camera_distance_mm", "must be > 0");
    if (indenters.empty()) return bad("/indenters", "indenter pool is empty");
    for (std::size_t i = 0; i < indenters.size(); ++i) {
      const auto& e = indenters[i];
      const std::string at = "/indenters/" + std::to_string(i);
      const std::pair<const char*, const Range*> sizes[] = {
          {"radius_mm", &e.radius_mm}, {"inner_radius_mm", &e.inner_radius_mm}, {"side_mm", &e.side_mm},
          {"half_angle_deg", &e.half_angle_deg}, {"length_mm", &e.length_mm}};
      for (const auto& [key, r] : sizes)
        if (!(r->lo > 0.0 && ordered(*r))) return bad(at + "/" + key, "range must be positive and ordered");
      if (e.half_angle_deg.hi >= 90.0) return bad(at + "/half_angle_deg", "half angle must be < 90 deg");
      if (e.shape == IndenterShape::hollow_octagon && !(e.inner_radius_mm.hi < e.radius_mm.lo))
        return bad(at + "/inner_radius_mm", "inner radius range must stay below the outer radius range");
    }
    if (positions_mm.empty()) return bad("/positions_mm", "no indenter positions");
    if (position_jitter_mm < 0) return bad("/position_jitter_mm", "must be >= 0");
    if (!(press_depth_mm.lo >= 0.0 && press_depth_mm.hi <= kMaxPressDepthMm && ordered(press_depth_mm)))
      return bad("/press_depth_mm", "range must lie within [0, 1.5] mm");
    if (grid[0] < 2 || grid[1] > 8 || grid[0] > grid[1]) return bad("/grid", "range must lie within [2, 8]");
    if (sensor.width_px() / grid[1] < kMinCellPx || sensor.height_px() / grid[1] < kMinCellPx)
      return bad("/grid", "largest grid leaves cells smaller than 4 pixels");
    if (!(amplitude_px.lo >= 0.0 && amplitude_px.hi <= kMaxWaveAmplitudePx && ordered(amplitude_px)))
      return bad("/amplitude_px", "range must lie within [0, 5] px");
    const std::pair<const char*, const Range*> factors[] = {
        {"brightness", &jitter.brightness}, {"contrast", &jitter.contrast}, {"saturation", &jitter.saturation}};
    for (const auto& [key, r] : factors)
      if (!(r->lo >= 0.0 && r->hi <= 2.0 && ordered(*r)))
        return bad(std::string("/jitter/") + key, "factor range must lie within [0, 2]");
    if (!(jitter.hue_deg.lo >= -18.0 && jitter.hue_deg.hi <= 18.0 && ordered(jitter.hue_deg)))
      return bad("/jitter/hue_deg", "range must lie within [-18, 18] deg");
    if (background.source == ImageSource::directory && background.path.empty())
      return bad("/background", "directory source needs a path");
    for (float v : background.color)
      if (!(v >= 0.0f && v <= 1.0f)) return bad("/background", "colour components must lie in [0, 1]");
    if (!(blur_radius_px.lo >= 0.0 && blur_radius_px.hi <= 32.0 && ordered(blur_radius_px)))
      return bad("/blur_radius_px", "range must lie within [0, 32] px");
    if (!(contact_threshold > 0.0 && contact_threshold < 1.0))
      return bad("/contact_threshold", "must lie in (0, 1)");
    if (smoothing_sigma_mm < 0.0) return bad("/smoothing_sigma_mm", "must be >= 0");
    if (calibration.magnitude_bins < 2) return bad("/calibration/magnitude_bins", "must be >= 2");
    if (calibration.angle_bins < 4) return bad("/calibration/angle_bins", "must be >= 4");
    if (shadow.march_px < 0) return bad("/shadow/march_px", "must be >= 0");
    if (!(shadow.attenuation >= 0.0 && shadow.attenuation <= 1.0))
      return bad("/shadow/attenuation", "must lie in [0, 1]");
    if (!(shadow.elevation_deg > 0.0 && shadow.elevation_deg < 90.0))
      return bad("/shadow/elevation_deg", "must lie in (0, 90)");
    if (!(light_map.vignette_exponent > 0.0)) return bad("/light_map/vignette_exponent", "must be > 0");
    if (!(light_map.edge_attenuation >= 0.0 && light_map.edge_attenuation <= 1.0))
      return bad("/light_map/edge_attenuation", "must lie in [0, 1]");
    if (tactile_background.source == ImageSource::constant)
      return bad("/tactile_background/source", "must be procedural or directory");
    if (tactile_background.source == ImageSource::directory && tactile_background.path.empty())
      return bad("/tactile_background/path", "directory source needs a path");
    if (tactile_background.gain_variation < 0.0) return bad("/tactile_background/gain_variation", "must be >= 0");
    if (tactile_background.grain < 0.0) return bad("/tactile_background/grain", "must be >= 0");
    if (object.colors.empty()) return bad("/object/colors", "colour list is empty");
    for (std::size_t i = 0; i < object.colors.size(); ++i)
      for (float v : object.colors[i])
        if (!(v >= 0.0f && v <= 1.0f))
          return bad("/object/colors/" + std::to_string(i), "colour components must lie in [0, 1]");
    if (!(object.texture >= 0.0 && object.texture <= 1.0)) return bad("/object/texture", "must lie in [0, 1]");
    if (!(object.shading >= 0.0 && object.shading <= 1.0)) return bad("/object/shading", "must lie in [0, 1]");
    if (!(object.reach_mm > 0.0)) return bad("/object/reach_mm", "must be > 0");
    if (max_attempts < 1) return bad("/max_attempts", "must be >= 1");
    return std::nullopt;
  }

  void validate() const {
    if (auto issue = check()) throw ConfigError(issue->path + ": " + issue->message);
  }
};

// ---------------------------------------------------------------------------
// Sample synthesis

/// Resources derived once from a configuration; immutable and shareable.
struct SceneAssets {
  CalibrationTable table;
  LightModel lights;
  Image light_map;
  Image tactile_base;  // render of the undeformed gel
  std::vector<Image> backgrounds;
  std::vector<Image> tactile_backgrounds;
};

namespace detail {

inline Image resize_bilinear(const Image& src, int w, int h) {
  if (src.width() == w && src.height() == h) return src;
  Image out(w, h, src.channels());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double sx = std::clamp((x + 0.5) * src.width() / w - 0.5, 0.0, src.width() - 1.0);
        const double sy = std::clamp((y + 0.5) * src.height() / h - 0.5, 0.0, src.height() - 1.0);
        const int x0 = static_cast<int>(sx);
        const int y0 = static_cast<int>(sy);
        const int x1 = std::min(x0 + 1, src.width() - 1);
        const int y1 = std::min(y0 + 1, src.height() - 1);
        const double fx = sx - x0;
        const double fy = sy - y0;
        const double v = (1 - fy) * ((1 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c)) +
                         fy * ((1 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c));
        out.at(x, y, c) = static_cast<float>(v);
      }
  return out;
}

inline Image to_rgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(img.width(), img.height(), 3);
  for (int c = 0; c < 3; ++c) std::copy(img.plane(0).begin(), img.plane(0).end(), out.plane(c).begin());
  return out;
}

inline std::vector<Image> load_png_directory(const std::string& dir, int w, int h) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG files in " + dir);
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(resize_bilinear(to_rgb(read_png(f)), w, h));
  return out;
}

/// Base colour under a radial falloff reaching `edge_attenuation` at the
/// corners.
inline Image make_light_map(const Rgb& base, int w, int h, double exponent, double edge) {
  Image out(w, h, 3);
  const double cx = 0.5 * w;
  const double cy = 0.5 * h;
  const double rmax = std::hypot(cx, cy);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = std::hypot(x + 0.5 - cx, y + 0.5 - cy) / rmax;
      const double gain = 1.0 - (1.0 - edge) * std::pow(r, exponent);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_unit(static_cast<float>(base[c] * gain));
    }
  return out;
}

/// Smooth random colour field with a few mid-frequency components.
inline Image procedural_background(int w, int h, RandomStream& rng) {
  Image out(w, h, 3);
  std::array<double, 3> base;
  for (double& b : base) b = rng.uniform(0.15, 0.85);
  struct Wave {
    double fx, fy, phase, amp;
    std::array<double, 3> weight;
  };
  std::vector<Wave> waves(8);
  for (std::size_t k = 0; k < waves.size(); ++k) {
    Wave& wv = waves[k];
    const double fmax = k < 4 ? 2.0 : 8.0;
    wv.fx = rng.uniform(-fmax, fmax);
    wv.fy = rng.uniform(-fmax, fmax);
    wv.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    wv.amp = rng.uniform(0.03, k < 4 ? 0.18 : 0.08);
    for (double& c : wv.weight) c = rng.uniform(0.4, 1.0);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w;
      const double v = (y + 0.5) / h;
      std::array<double, 3> acc = base;
      for (const Wave& wv : waves) {
        const double s = wv.amp * std::cos(2.0 * std::numbers::pi * (wv.fx * u + wv.fy * v) + wv.phase);
        for (int c = 0; c < 3; ++c) acc[c] += s * wv.weight[c];
      }
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_unit(static_cast<float>(acc[c]));
    }
  return out;
}

/// Tactile background: base render times a per-channel quadratic gain field
/// plus per-pixel grain.
inline Image procedural_tactile_background(const Image& base, double gain_variation, double grain,
                                           RandomStream& rng) {
  const int w = base.width();
  const int h = base.height();
  std::array<std::array<double, 4>, 3> coef;
  for (auto& cc : coef)
    for (double& v : cc) v = rng.uniform(-1.0, 1.0);
  Image out(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double X = 2.0 * (x + 0.5) / w - 1.0;
      const double Y = 2.0 * (y + 0.5) / h - 1.0;
      const double noise = grain * rng.uniform(-1.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const auto& k = coef[c];
        const double gain =
            1.0 + gain_variation * (k[0] * X + k[1] * Y + 0.5 * k[2] * (X * X + Y * Y) + 0.5 * k[3] * X * Y);
        out.at(x, y, c) = clamp_unit(static_cast<float>(base.at(x, y, c) * gain + noise));
      }
    }
  return out;
}

}  // namespace detail

inline SceneAssets prepare_assets(const GenConfig& config) {
  config.validate();
  const int w = config.sensor.width_px();
  const int h = config.sensor.height_px();
  SceneAssets a;
  a.lights = default_light_model();
  a.lights.normalize();
  a.table = config.calibration.file.empty()
                ? synth_calibration_table(a.lights, config.calibration.magnitude_bins,
                                          config.calibration.angle_bins)
                : read_calibration_table(config.calibration.file);
  a.tactile_base = render_tactile(HeightField(w, h, config.sensor.mm_per_px), a.table);
  if (config.light_map.file.empty()) {
    a.light_map = detail::make_light_map(a.table.base_color(), w, h, config.light_map.vignette_exponent,
                                         config.light_map.edge_attenuation);
  } else {
    a.light_map = detail::to_rgb(read_png(config.light_map.file));
    if (a.light_map.width() != w || a.light_map.height() != h)
      throw ConfigError("light map " + config.light_map.file + " does not match the sensor grid");
  }
  if (config.background.source == ImageSource::directory)
    a.backgrounds = detail::load_png_directory(config.background.path, w, h);
  if (config.tactile_background.source == ImageSource::directory)
    a.tactile_backgrounds = detail::load_png_directory(config.tactile_background.path, w, h);
  return a;
}

/// One synthesized record. Invariants (bit-exact):
///   i_mux == mask_blend(m_wavy, target_tactile, target_vision)
///   i_ref == mask_blend(m_stg, t_bg_jit, l_v)
struct MuxSample {
  Image i_mux;
  Image i_ref;
  Image target_vision;    // relit vision
  Image target_tactile;   // absolute jittered tactile
  Image target_residual;  // signed contact residual
  Image t_bg_jit;         // jittered no-contact tactile background
  Image l_v;              // pure-vision light map
  Mask m_c;
  Mask m_wavy;
  Mask m_stg;
  std::uint64_t seed = 0;
  IndenterSpec indenter;
  JitterParams jitter;
  WavySpec wavy;
  double blur_radius_px = 0.0;
  double contact_ratio = 0.0;
  std::size_t saturated_pixels = 0;
};

/// Pre-composite images, retained on request for replay and inspection.
struct SampleIntermediates {
  HeightField deformed;
  Image t_raw;
  Image t_org_bg;
  Image t_bg;
  Image v_bg;
  Image v_obj;
  Mask m_bg;
  Image v_raw;
  Image v_jit;
};

struct Rejection {
  std::uint64_t seed = 0;
  double contact_ratio = 0.0;
};

struct SynthesisResult {
  std::optional<MuxSample> sample;
  Rejection rejection;
  bool accepted() const { return sample.has_value(); }
};

inline bool verify_sample_identities(const MuxSample& s) {
  return bit_equal(s.i_mux, mask_blend(s.m_wavy, s.target_tactile, s.target_vision)) &&
         bit_equal(s.i_ref, mask_blend(s.m_stg, s.t_bg_jit, s.l_v));
}

namespace detail {

inline IndenterSpec draw_indenter(const GenConfig& cfg, std::uint64_t seed) {
  RandomStream pick(seed, "indenter");
  const auto& e = cfg.indenters[static_cast<std::size_t>(
      pick.uniform_int(0, static_cast<std::int64_t>(cfg.indenters.size()) - 1))];
  IndenterSpec s;
  s.shape = e.shape;
  s.radius_mm = e.radius_mm.sample(pick);
  s.inner_radius_mm = e.inner_radius_mm.sample(pick);
  s.side_mm = e.side_mm.sample(pick);
  s.half_angle_deg = e.half_angle_deg.sample(pick);
  s.length_mm = e.length_mm.sample(pick);
  RandomStream pos(seed, "position");
  const auto& p = cfg.positions_mm[static_cast<std::size_t>(
      pos.uniform_int(0, static_cast<std::int64_t>(cfg.positions_mm.size()) - 1))];
  s.x_mm = p[0] + pos.uniform(-cfg.position_jitter_mm, cfg.position_jitter_mm);
  s.y_mm = p[1] + pos.uniform(-cfg.position_jitter_mm, cfg.position_jitter_mm);
  RandomStream depth(seed, "press_depth");
  s.press_depth_mm = cfg.press_depth_mm.sample(depth);
  return s;
}

}  // namespace detail

/// Runs the whole pipeline for one seed. With `filter` set, a sample whose
/// contact ratio does not exceed the threshold is rejected right after the
/// press step (the filter depends on nothing downstream).
inline SynthesisResult synthesize(const GenConfig& cfg, const SceneAssets& assets,
                                  std::uint64_t seed, bool filter = true,
                                  SampleIntermediates* keep = nullptr) {
  const SensorGeometry& geo = cfg.sensor;
  const int w = geo.width_px();
  const int h = geo.height_px();

  const IndenterSpec ind = detail::draw_indenter(cfg, seed);
  const HeightField hm = indenter_heightmap(ind, geo);
  PressResult pressed = press(hm, cfg.smoothing_sigma_mm);
  const ContactDecision decision = contact_ratio_filter(pressed.contact, cfg.contact_threshold);
  SynthesisResult result;
  result.rejection = {seed, decision.ratio};
  if (filter && !decision.accepted) return result;

  // Tactile path.
  RenderStats stats;
  const Image t_render = render_tactile(pressed.deformed, assets.table, &stats);
  const Image t_raw = cast_shadows(t_render, pressed.deformed, pressed.contact, assets.lights, cfg.shadow);
  const Image& t_org_bg = assets.tactile_base;
  const Image t_diff = tactile_diff(t_raw, t_org_bg);

  // Vision path.
  RandomStream bg_rng(seed, "background");
  Image v_bg;
  switch (cfg.background.source) {
    case ImageSource::procedural: v_bg = detail::procedural_background(w, h, bg_rng); break;
    case ImageSource::constant: {
      v_bg = Image(w, h, 3);
      for (int c = 0; c < 3; ++c) std::fill(v_bg.plane(c).begin(), v_bg.plane(c).end(), cfg.background.color[c]);
      break;
    }
    case ImageSource::directory:
      v_bg = assets.backgrounds[static_cast<std::size_t>(
          bg_rng.uniform_int(0, static_cast<std::int64_t>(assets.backgrounds.size()) - 1))];
      break;
  }
  RandomStream blur_rng(seed, "blur_radius");
  const double blur_radius = cfg.blur_radius_px.sample(blur_rng);
  v_bg = disk_blur(v_bg, blur_radius);

  RandomStream obj_rng(seed, "object");
  const Rgb color = cfg.object.colors[static_cast<std::size_t>(
      obj_rng.uniform_int(0, static_cast<std::int64_t>(cfg.object.colors.size()) - 1))];
  const double tex_fx = obj_rng.uniform(2.0, 10.0);
  const double tex_fy = obj_rng.uniform(2.0, 10.0);
  const double tex_phase = obj_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const auto gap = indenter_gap_field(ind, geo);
  Image v_obj(w, h, 3);
  HeightField depth(w, h, geo.mm_per_px, 1.0e3f);
  const double reach = cfg.object.reach_mm;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double g = gap[static_cast<std::size_t>(y) * w + x];
      if (!(g <= reach)) continue;
      depth.at(x, y) = static_cast<float>(cfg.camera_distance_mm + g);
      const double shade = 1.0 - cfg.object.shading * (g / reach);
      const double pattern = 1.0 - cfg.object.texture * 0.5 *
          (1.0 + std::cos(2.0 * std::numbers::pi * (tex_fx * geo.x_mm(x) + tex_fy * geo.y_mm(y)) / 10.0 + tex_phase));
      for (int c = 0; c < 3; ++c) v_obj.at(x, y, c) = clamp_unit(static_cast<float>(color[c] * shade * pattern));
    }
  const Mask m_bg = background_mask(depth, v_obj, cfg.camera_distance_mm + reach, 1.0e-3);
  const Image v_raw = compose_raw_vision(v_bg, v_obj, m_bg);

  // Tactile background and correlated jitter.
  RandomStream tbg_rng(seed, "tactile_background");
  Image t_bg;
  if (cfg.tactile_background.source == ImageSource::directory) {
    t_bg = assets.tactile_backgrounds[static_cast<std::size_t>(
        tbg_rng.uniform_int(0, static_cast<std::int64_t>(assets.tactile_backgrounds.size()) - 1))];
  } else {
    t_bg = detail::procedural_tactile_background(t_org_bg, cfg.tactile_background.gain_variation,
                                                 cfg.tactile_background.grain, tbg_rng);
  }
  RandomStream jit_rng(seed, "jitter");
  const JitterParams jp = cfg.jitter.sample(jit_rng);
  auto jittered = correlated_jitter(jp, {t_bg, v_raw});
  Image t_bg_jit = std::move(jittered[0]);
  Image v_jit = std::move(jittered[1]);

  SaturationStats sat;
  Image t_jit = residual_tactile(t_diff, t_bg_jit, &sat);
  const Image& l_v = assets.light_map;
  Image v_relit = relight(v_jit, t_jit, l_v, pressed.contact);

  // Masks and composites.
  RandomStream grid_rng(seed, "grid");
  const int grid = static_cast<int>(grid_rng.uniform_int(cfg.grid[0], cfg.grid[1]));
  RandomStream wave_rng(seed, "wavy");
  WavySpec wavy = sample_wavy_spec(grid, cfg.amplitude_px.lo, cfg.amplitude_px.hi, wave_rng);

  MuxSample s;
  s.m_wavy = wavy_mask(wavy, w, h);
  s.m_stg = straight_mask(grid, grid, w, h);
  s.i_mux = multiplex(s.m_wavy, t_jit, v_relit);
  s.i_ref = reference_image(s.m_stg, t_bg_jit, l_v);
  s.target_vision = std::move(v_relit);
  s.target_tactile = std::move(t_jit);
  s.target_residual = t_diff;
  s.t_bg_jit = std::move(t_bg_jit);
  s.l_v = l_v;
  s.m_c = std::move(pressed.contact);
  s.seed = seed;
  s.indenter = ind;
  s.jitter = jp;
  s.wavy = std::move(wavy);
  s.blur_radius_px = blur_radius;
  s.contact_ratio = decision.ratio;
  s.saturated_pixels = stats.saturated + sat.clamped;

  if (keep) {
    keep->deformed = std::move(pressed.deformed);
    keep->t_raw = t_raw;
    keep->t_org_bg = t_org_bg;
    keep->t_bg = std::move(t_bg);
    keep->v_bg = std::move(v_bg);
    keep->v_obj = std::move(v_obj);
    keep->m_bg = m_bg;
    keep->v_raw = v_raw;
    keep->v_jit = std::move(v_jit);
  }
  result.sample = std::move(s);
  return result;
}

/// Seed -> sample, or a rejection carrying the measured contact ratio.
inline SynthesisResult synthesize_sample(const GenConfig& cfg, const SceneAssets& assets,
                                         std::uint64_t seed) {
  return synthesize(cfg, assets, seed, true);
}

inline SynthesisResult synthesize_sample(const GenConfig& cfg, std::uint64_t seed) {
  return synthesize(cfg, prepare_assets(cfg), seed, true);
}

}  // namespace muxgel
