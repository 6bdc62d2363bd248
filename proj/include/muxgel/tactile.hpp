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

// Contact geometry from procedural indenters and photometric rendering of the
// gel surface through a binned gradient-to-RGB table, with 2-D ray-marched
// shadows.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "muxgel/error.hpp"
#include "muxgel/image.hpp"

namespace muxgel {

/// Sensor plane sampled on a regular pixel grid centred on the origin.
struct SensorGeometry {
  double width_mm = 19.2;
  double height_mm = 14.4;
  double mm_per_px = 0.06;

  int width_px() const { return static_cast<int>(std::lround(width_mm / mm_per_px)); }
  int height_px() const { return static_cast<int>(std::lround(height_mm / mm_per_px)); }

  /// Sensor-plane coordinate (mm) of the centre of pixel column i.
  double x_mm(int i) const { return (i + 0.5) * mm_per_px - 0.5 * width_px() * mm_per_px; }
  double y_mm(int j) const { return (j + 0.5) * mm_per_px - 0.5 * height_px() * mm_per_px; }

  void validate() const {
    if (!(mm_per_px > 0.0)) throw ConfigError("sensor: mm_per_px must be positive");
    if (width_px() < 1 || height_px() < 1) throw ConfigError("sensor: empty pixel grid");
  }
};

enum class IndenterShape { sphere, edge, square, solid_octagon, hollow_octagon };

inline std::string_view to_string(IndenterShape s) {
  switch (s) {
    case IndenterShape::sphere: return "sphere";
    case IndenterShape::edge: return "edge";
    case IndenterShape::square: return "square";
    case IndenterShape::solid_octagon: return "solid-octagon";
    case IndenterShape::hollow_octagon: return "hollow-octagon";
  }
  return "?";
}

inline IndenterShape parse_indenter_shape(std::string_view tag) {
  for (auto s : {IndenterShape::sphere, IndenterShape::edge, IndenterShape::square,
                 IndenterShape::solid_octagon, IndenterShape::hollow_octagon})
    if (tag == to_string(s)) return s;
  throw ConfigError("unknown indenter shape '" + std::string(tag) + "'");
}

inline bool is_convex(IndenterShape s) { return s != IndenterShape::hollow_octagon; }

constexpr double kMaxPressDepthMm = 1.5;

/// Rigid indenter pressed into the flat gel plane.
///   sphere           radius_mm
///   edge             wedge along y: half_angle_deg, length_mm
///   square           side_mm (flat face)
///   solid-octagon    radius_mm = circumradius (flat face, axis-aligned edges)
///   hollow-octagon   radius_mm = outer, inner_radius_mm = inner circumradius
struct IndenterSpec {
  IndenterShape shape = IndenterShape::sphere;
  double radius_mm = 4.0;
  double inner_radius_mm = 2.0;
  double side_mm = 6.0;
  double half_angle_deg = 30.0;
  double length_mm = 8.0;
  double x_mm = 0.0;
  double y_mm = 0.0;
  double press_depth_mm = 0.0;

  void validate() const {
    if (!(press_depth_mm >= 0.0 && press_depth_mm <= kMaxPressDepthMm))
      throw ConfigError("indenter: press depth outside [0, 1.5] mm");
    switch (shape) {
      case IndenterShape::sphere:
      case IndenterShape::solid_octagon:
        if (!(radius_mm > 0.0)) throw ConfigError("indenter: radius must be positive");
        break;
      case IndenterShape::hollow_octagon:
        if (!(inner_radius_mm > 0.0 && inner_radius_mm < radius_mm))
          throw ConfigError("indenter: hollow octagon needs 0 < inner < outer");
        break;
      case IndenterShape::square:
        if (!(side_mm > 0.0)) throw ConfigError("indenter: side must be positive");
        break;
      case IndenterShape::edge:
        if (!(half_angle_deg > 0.0 && half_angle_deg < 90.0) || !(length_mm > 0.0))
          throw ConfigError("indenter: edge needs half angle in (0,90) deg and positive length");
        break;
    }
  }
};

namespace detail {

/// Regular octagon with edges parallel to the axes.
inline bool inside_octagon(double x, double y, double circumradius) {
  const double apothem = circumradius * std::cos(std::numbers::pi / 8.0);
  const double ax = std::abs(x);
  const double ay = std::abs(y);
  return ax <= apothem && ay <= apothem && (ax + ay) <= apothem * std::numbers::sqrt2;
}

}  // namespace detail

/// Height of the indenter surface above its lowest point at sensor-plane
/// location (x,y); +inf where the indenter has no surface.
inline double indenter_gap(const IndenterSpec& spec, double x, double y) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double lx = x - spec.x_mm;
  const double ly = y - spec.y_mm;
  switch (spec.shape) {
    case IndenterShape::sphere: {
      const double r2 = lx * lx + ly * ly;
      const double R = spec.radius_mm;
      if (r2 > R * R) return inf;
      return R - std::sqrt(R * R - r2);
    }
    case IndenterShape::edge: {
      if (std::abs(ly) > 0.5 * spec.length_mm) return inf;
      const double t = std::tan(spec.half_angle_deg * std::numbers::pi / 180.0);
      return std::abs(lx) / t;
    }
    case IndenterShape::square: {
      const double h = 0.5 * spec.side_mm;
      return (std::abs(lx) <= h && std::abs(ly) <= h) ? 0.0 : inf;
    }
    case IndenterShape::solid_octagon:
      return detail::inside_octagon(lx, ly, spec.radius_mm) ? 0.0 : inf;
    case IndenterShape::hollow_octagon:
      return (detail::inside_octagon(lx, ly, spec.radius_mm) &&
              !detail::inside_octagon(lx, ly, spec.inner_radius_mm))
                 ? 0.0
                 : inf;
  }
  return inf;
}

/// Scalar field over the sensor grid, in millimetres. For contact fields,
/// 0 is the undeformed plane and positive values are indentation.
class HeightField {
 public:
  HeightField() = default;
  HeightField(int width, int height, double mm_per_px, float fill = 0.0f)
      : width_(width), height_(height), mm_per_px_(mm_per_px),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double mm_per_px() const { return mm_per_px_; }

  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  float max() const {
    return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end());
  }

 private:
  int width_ = 0;
  int height_ = 0;
  double mm_per_px_ = 1.0;
  std::vector<float> data_;
};

inline HeightField flip_horizontal(const HeightField& f) {
  HeightField out = f;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) out.at(x, y) = f.at(f.width() - 1 - x, y);
  return out;
}

/// Gap field of an indenter sampled at pixel centres (inf off the indenter).
inline std::vector<double> indenter_gap_field(const IndenterSpec& spec,
                                              const SensorGeometry& geo) {
  const int w = geo.width_px();
  const int h = geo.height_px();
  std::vector<double> gap(static_cast<std::size_t>(w) * h);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i)
      gap[static_cast<std::size_t>(j) * w + i] = indenter_gap(spec, geo.x_mm(i), geo.y_mm(j));
  return gap;
}

/// Penetration depth max(0, press_depth - gap) of the rigid indenter into the
/// flat gel plane, sampled at pixel centres. Footprints beyond the field are
/// cropped.
inline HeightField indenter_heightmap(const IndenterSpec& spec, const SensorGeometry& geo) {
  spec.validate();
  geo.validate();
  HeightField hf(geo.width_px(), geo.height_px(), geo.mm_per_px);
  if (spec.press_depth_mm <= 0.0) return hf;
  const auto gap = indenter_gap_field(spec, geo);
  for (std::size_t k = 0; k < gap.size(); ++k)
    hf.data()[k] = static_cast<float>(std::max(0.0, spec.press_depth_mm - gap[k]));
  return hf;
}

struct PressResult {
  Mask contact;
  HeightField deformed;
};

/// Contact mask from the raw penetration; elastomer compliance approximated by
/// a Gaussian smoothing (sigma in mm) of the penetration field.
inline PressResult press(const HeightField& indenter_hm, double smoothing_sigma_mm) {
  if (smoothing_sigma_mm < 0.0) throw ConfigError("press: negative smoothing sigma");
  PressResult r{Mask(indenter_hm.width(), indenter_hm.height()), indenter_hm};
  for (std::size_t i = 0; i < indenter_hm.data().size(); ++i)
    r.contact.data()[i] = indenter_hm.data()[i] > 0.0f ? 1.0f : 0.0f;
  if (smoothing_sigma_mm > 0.0) {
    r.deformed.data() = detail::gaussian_blur_plane(
        indenter_hm.data(), indenter_hm.width(), indenter_hm.height(),
        smoothing_sigma_mm / indenter_hm.mm_per_px());
  }
  return r;
}

using Rgb = std::array<float, 3>;

/// Binned map from surface gradient (magnitude, direction) to RGB. Magnitude
/// bin i represents |g| = i * kMaxGradient / (B_m - 1); angle bin j represents
/// atan2(gy, gx) = j * 2pi / B_a. Lookups interpolate bilinearly, periodic in
/// angle.
class CalibrationTable {
 public:
  static constexpr double kMaxGradient = 2.0;

  CalibrationTable() = default;
  CalibrationTable(int magnitude_bins, int angle_bins)
      : magnitude_bins_(magnitude_bins), angle_bins_(angle_bins) {
    if (magnitude_bins < 2 || angle_bins < 4)
      throw ConfigError("calibration table needs B_m >= 2 and B_a >= 4");
    entries_.assign(static_cast<std::size_t>(magnitude_bins) * angle_bins, Rgb{0, 0, 0});
  }

  int magnitude_bins() const { return magnitude_bins_; }
  int angle_bins() const { return angle_bins_; }
  bool populated() const { return !entries_.empty(); }

  Rgb& entry(int mag, int ang) {
    return entries_[static_cast<std::size_t>(mag) * angle_bins_ + ang];
  }
  const Rgb& entry(int mag, int ang) const {
    return entries_[static_cast<std::size_t>(mag) * angle_bins_ + ang];
  }
  const std::vector<Rgb>& entries() const { return entries_; }

  double magnitude_at(int i) const { return i * kMaxGradient / (magnitude_bins_ - 1); }
  double angle_at(int j) const { return j * 2.0 * std::numbers::pi / angle_bins_; }

  /// Zero-gradient entry: the sensor base colour.
  const Rgb& base_color() const { return entry(0, 0); }

  /// Bilinear lookup. Magnitudes beyond the last bin clamp to it and set
  /// *saturated.
  Rgb lookup(double gx, double gy, bool* saturated = nullptr) const {
    const double mag = std::hypot(gx, gy);
    double u = mag / kMaxGradient * (magnitude_bins_ - 1);
    const bool sat = u > magnitude_bins_ - 1;
    if (saturated) *saturated = sat;
    if (sat) u = magnitude_bins_ - 1;
    int i0 = static_cast<int>(std::floor(u));
    double fu = u - i0;
    int i1 = i0 + 1;
    if (i1 >= magnitude_bins_) {
      i1 = i0;
      fu = 0.0;
    }
    double ang = std::atan2(gy, gx);
    if (ang < 0.0) ang += 2.0 * std::numbers::pi;
    double v = ang / (2.0 * std::numbers::pi) * angle_bins_;
    int j0 = static_cast<int>(std::floor(v));
    double fv = v - j0;
    j0 %= angle_bins_;
    const int j1 = (j0 + 1) % angle_bins_;
    Rgb out;
    for (int c = 0; c < 3; ++c) {
      const double lo = (1.0 - fv) * entry(i0, j0)[c] + fv * entry(i0, j1)[c];
      const double hi = (1.0 - fv) * entry(i1, j0)[c] + fv * entry(i1, j1)[c];
      out[c] = static_cast<float>((1.0 - fu) * lo + fu * hi);
    }
    return out;
  }

 private:
  int magnitude_bins_ = 0;
  int angle_bins_ = 0;
  std::vector<Rgb> entries_;
};

/// Text format: "MUXCAL v1 B_m B_a", then B_m*B_a lines "R G B", row-major
/// over magnitude then angle.
inline std::string format_calibration_table(const CalibrationTable& t) {
  std::string out = "MUXCAL v1 " + std::to_string(t.magnitude_bins()) + " " +
                    std::to_string(t.angle_bins()) + "\n";
  char line[96];
  for (const Rgb& e : t.entries()) {
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", e[0], e[1], e[2]);
    out += line;
  }
  return out;
}

inline CalibrationTable parse_calibration_table(std::istream& in,
                                                const std::string& source = "calibration") {
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line)) throw ConfigError(source + ":1: empty calibration file");
  std::istringstream hs(line);
  std::string magic, version;
  int bm = 0, ba = 0;
  if (!(hs >> magic >> version >> bm >> ba) || magic != "MUXCAL" || version != "v1")
    throw ConfigError(source + ":1: expected header 'MUXCAL v1 B_m B_a'");
  CalibrationTable t(bm, ba);
  for (int i = 0; i < bm; ++i) {
    for (int j = 0; j < ba; ++j) {
      ++lineno;
      if (!std::getline(in, line))
        throw ConfigError(source + ":" + std::to_string(lineno) + ": missing table entry");
      std::istringstream ls(line);
      Rgb e;
      if (!(ls >> e[0] >> e[1] >> e[2]))
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected three floats");
      for (float v : e)
        if (!(v >= 0.0f && v <= 1.0f))
          throw ConfigError(source + ":" + std::to_string(lineno) + ": entry outside [0,1]");
      t.entry(i, j) = e;
    }
  }
  return t;
}

inline CalibrationTable read_calibration_table(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  return parse_calibration_table(f, path.string());
}

inline void write_calibration_table(const std::filesystem::path& path,
                                    const CalibrationTable& t) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << format_calibration_table(t);
}

using Vec3 = std::array<double, 3>;

struct Light {
  Vec3 direction;  // unit vector from the surface towards the light
  Vec3 tint{1.0, 1.0, 1.0};
  double intensity = 1.0;
};

/// Internal illumination. The flat gel surface has normal (0,0,-1), facing the
/// camera; a light "along -z" shines straight onto it.
struct LightModel {
  std::vector<Light> lights;
  Vec3 ambient{0.0, 0.0, 0.0};

  /// Normalizes directions; rejects negative intensities and zero vectors.
  void normalize() {
    for (Light& l : lights) {
      const double n = std::sqrt(l.direction[0] * l.direction[0] +
                                 l.direction[1] * l.direction[1] +
                                 l.direction[2] * l.direction[2]);
      if (!(n > 0.0)) throw ConfigError("light model: zero direction vector");
      for (double& d : l.direction) d /= n;
      if (l.intensity < 0.0) throw ConfigError("light model: negative intensity");
    }
  }
};

/// Light arriving from planar azimuth (deg) at the given elevation above the
/// gel plane.
inline Light make_light(double azimuth_deg, double elevation_deg, Vec3 tint, double intensity) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  return Light{{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), -std::sin(el)},
               tint, intensity};
}

/// GelSight-style RGB rig: red from -x, green from -y, blue from the +x+y
/// diagonal.
inline LightModel default_light_model() {
  LightModel m;
  m.lights = {make_light(180.0, 45.0, {1, 0, 0}, 0.55), make_light(270.0, 45.0, {0, 1, 0}, 0.55),
              make_light(45.0, 45.0, {0, 0, 1}, 0.55)};
  m.ambient = {0.08, 0.08, 0.08};
  return m;
}

namespace detail {

inline Vec3 surface_normal(double gx, double gy) {
  const double n = std::sqrt(gx * gx + gy * gy + 1.0);
  return {gx / n, gy / n, -1.0 / n};
}

inline double lambert(const Vec3& n, const Vec3& l) {
  return std::max(0.0, n[0] * l[0] + n[1] * l[1] + n[2] * l[2]);
}

}  // namespace detail

/// Lambertian shading of each bin's representative gradient.
inline CalibrationTable synth_calibration_table(LightModel lights, int magnitude_bins,
                                                int angle_bins) {
  lights.normalize();
  const bool any_light = std::any_of(lights.lights.begin(), lights.lights.end(),
                                     [](const Light& l) { return l.intensity > 0.0; });
  const bool any_ambient = std::any_of(lights.ambient.begin(), lights.ambient.end(),
                                       [](double a) { return a > 0.0; });
  if (!lights.lights.empty() ? !any_light : !any_ambient)
    throw ConfigError("light model emits no light");
  CalibrationTable t(magnitude_bins, angle_bins);
  for (int i = 0; i < magnitude_bins; ++i) {
    for (int j = 0; j < angle_bins; ++j) {
      const double g = t.magnitude_at(i);
      const double a = t.angle_at(j);
      const Vec3 n = detail::surface_normal(g * std::cos(a), g * std::sin(a));
      Rgb& e = t.entry(i, j);
      for (int c = 0; c < 3; ++c) {
        double v = lights.ambient[c];
        for (const Light& l : lights.lights)
          v += l.intensity * l.tint[c] * detail::lambert(n, l.direction);
        e[c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return t;
}

struct Gradient {
  double gx = 0.0;
  double gy = 0.0;
};

/// Height gradient in mm/mm: central differences inside, one-sided at borders.
inline Gradient surface_gradient(const HeightField& f, int x, int y) {
  const double s = f.mm_per_px();
  Gradient g;
  const int w = f.width();
  const int h = f.height();
  if (w > 1) {
    if (x == 0) g.gx = (f.at(1, y) - f.at(0, y)) / s;
    else if (x == w - 1) g.gx = (f.at(w - 1, y) - f.at(w - 2, y)) / s;
    else g.gx = (f.at(x + 1, y) - f.at(x - 1, y)) / (2.0 * s);
  }
  if (h > 1) {
    if (y == 0) g.gy = (f.at(x, 1) - f.at(x, 0)) / s;
    else if (y == h - 1) g.gy = (f.at(x, h - 1) - f.at(x, h - 2)) / s;
    else g.gy = (f.at(x, y + 1) - f.at(x, y - 1)) / (2.0 * s);
  }
  return g;
}

struct RenderStats {
  std::size_t saturated = 0;  // pixels whose gradient exceeded the last bin
};

inline Image render_tactile(const HeightField& deformed, const CalibrationTable& table,
                            RenderStats* stats = nullptr) {
  if (!table.populated()) throw ConfigError("render_tactile: empty calibration table");
  Image out(deformed.width(), deformed.height(), 3);
  std::size_t saturated = 0;
  for (int y = 0; y < deformed.height(); ++y) {
    for (int x = 0; x < deformed.width(); ++x) {
      const Gradient g = surface_gradient(deformed, x, y);
      bool sat = false;
      const Rgb rgb = table.lookup(g.gx, g.gy, &sat);
      saturated += sat ? 1 : 0;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[c];
    }
  }
  if (stats) stats->saturated = saturated;
  return out;
}

struct ShadowParams {
  int march_px = 40;
  double attenuation = 0.55;  // multiplier applied to an occluded light's share
  double elevation_deg = 60.0;
};

/// For each light with a planar component, marches from every pixel towards
/// the light; a sample rising above the line at `elevation_deg` from the
/// pixel's own height occludes that light, whose share of the pixel's
/// Lambertian budget is then scaled by the attenuation. Never brightens.
inline Image cast_shadows(const Image& img, const HeightField& deformed, const Mask& contact,
                          LightModel lights, const ShadowParams& params = {}) {
  if (img.width() != deformed.width() || img.height() != deformed.height() ||
      !contact.same_size(img))
    throw ShapeError("cast_shadows: image, field and contact mask differ in size");
  if (img.channels() != 3) throw ShapeError("cast_shadows: expects an RGB image");
  if (params.attenuation < 0.0 || params.attenuation > 1.0)
    throw ConfigError("cast_shadows: attenuation outside [0,1]");
  if (contact.count_nonzero() == 0) return img;
  lights.normalize();

  const int w = img.width();
  const int h = img.height();
  const double step_rise =
      deformed.mm_per_px() * std::tan(params.elevation_deg * std::numbers::pi / 180.0);
  const float field_max = deformed.max();

  struct Planar {
    std::size_t light;
    double dx, dy;
  };
  std::vector<Planar> marchers;
  for (std::size_t k = 0; k < lights.lights.size(); ++k) {
    const Vec3& d = lights.lights[k].direction;
    const double n = std::hypot(d[0], d[1]);
    if (n > 1e-9) marchers.push_back({k, d[0] / n, d[1] / n});
  }

  Image out = img;
  std::vector<char> occluded(lights.lights.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double base = deformed.at(x, y);
      if (base + step_rise >= field_max) continue;
      bool any = false;
      std::fill(occluded.begin(), occluded.end(), 0);
      for (const Planar& m : marchers) {
        for (int k = 1; k <= params.march_px; ++k) {
          const int qx = static_cast<int>(std::lround(x + k * m.dx));
          const int qy = static_cast<int>(std::lround(y + k * m.dy));
          if (qx < 0 || qx >= w || qy < 0 || qy >= h) break;
          if (deformed.at(qx, qy) > base + k * step_rise) {
            occluded[m.light] = 1;
            any = true;
            break;
          }
        }
      }
      if (!any) continue;
      const Gradient g = surface_gradient(deformed, x, y);
      const Vec3 n = detail::surface_normal(g.gx, g.gy);
      for (int c = 0; c < 3; ++c) {
        double total = lights.ambient[c];
        double lost = 0.0;
        for (std::size_t k = 0; k < lights.lights.size(); ++k) {
          const Light& l = lights.lights[k];
          const double share = l.intensity * l.tint[c] * detail::lambert(n, l.direction);
          total += share;
          if (occluded[k]) lost += share * (1.0 - params.attenuation);
        }
        if (total <= 0.0) continue;
        const double keep = std::clamp(1.0 - lost / total, 0.0, 1.0);
        float& v = out.at(x, y, c);
        v = std::min(v, static_cast<float>(v * keep));
      }
    }
  }
  return out;
}

}  // namespace muxgel
