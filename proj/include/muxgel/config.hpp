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

// Generation config as a versioned JSON document ("schema": "muxgen/1").
// Unknown keys are errors; every diagnostic carries file and line.

#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "muxgel/error.hpp"
#include "muxgel/pipeline.hpp"

namespace muxgel {

constexpr std::string_view kConfigSchema = "muxgen/1";

/// Maps JSON pointers ("/jitter/hue_deg", "/indenters/0") to the 1-based
/// line where the member's key (or the array element) starts. Assumes text
/// that already parsed.
class KeyLocator {
 public:
  explicit KeyLocator(std::string_view text) : text_(text) {
    skip_ws();
    if (pos_ < text_.size()) value("");
  }

  int line_of(const std::string& pointer) const {
    std::string p = pointer;
    while (true) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      const auto cut = p.find_last_of('/');
      if (cut == std::string::npos || p.empty()) return 1;
      p.resize(cut);
    }
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
        out += text_[pos_ + 1];
        pos_ += 2;
        continue;
      }
      out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& path) {
    skip_ws();
    if (pos_ >= text_.size()) return;
    lines_.emplace(path, line_);
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const int key_line = line_;
        const std::string key = path + "/" + escape(string_token());
        lines_[key] = key_line;
        skip_ws();
        ++pos_;  // colon
        value(key);
        lines_[key] = key_line;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip_ws();
      int index = 0;
      while (pos_ < text_.size() && text_[pos_] != ']') {
        value(path + "/" + std::to_string(index++));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
             text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']')
        ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

namespace detail {

using nlohmann::json;

/// Reads one JSON document into a GenConfig, throwing "where:line: message".
class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string where, std::filesystem::path base_dir)
      : where_(std::move(where)), base_(std::move(base_dir)), locator_(text) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    throw ConfigError(where_ + ":" + std::to_string(locator_.line_of(pointer)) + ": " +
                      (pointer.empty() ? std::string("document") : pointer) + ": " + msg);
  }

  void only_keys(const json& obj, const std::string& at, std::initializer_list<std::string_view> keys) const {
    if (!obj.is_object()) fail(at, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      bool known = false;
      for (auto key : keys) known |= key == k;
      if (!known) fail(at + "/" + k, "unknown key '" + k + "'");
    }
  }

  double number(const json& v, const std::string& at) const {
    if (!v.is_number()) fail(at, "expected a number");
    return v.get<double>();
  }

  int integer(const json& v, const std::string& at) const {
    if (!v.is_number_integer()) fail(at, "expected an integer");
    return v.get<int>();
  }

  std::string string(const json& v, const std::string& at) const {
    if (!v.is_string()) fail(at, "expected a string");
    return v.get<std::string>();
  }

  std::string path(const json& v, const std::string& at) const {
    const std::string s = string(v, at);
    if (s.empty()) return s;
    const std::filesystem::path p(s);
    return p.is_absolute() ? s : (base_ / p).lexically_normal().string();
  }

  /// A [lo, hi] pair, or a bare number for a degenerate range.
  Range range(const json& v, const std::string& at) const {
    if (v.is_number()) return {v.get<double>(), v.get<double>()};
    if (!v.is_array() || v.size() != 2) fail(at, "expected a number or [lo, hi]");
    Range r{number(v[0], at + "/0"), number(v[1], at + "/1")};
    if (r.lo > r.hi) fail(at, "range lower bound exceeds upper bound");
    return r;
  }

  Rgb color(const json& v, const std::string& at) const {
    if (!v.is_array() || v.size() != 3) fail(at, "expected [r, g, b]");
    return {static_cast<float>(number(v[0], at + "/0")), static_cast<float>(number(v[1], at + "/1")),
            static_cast<float>(number(v[2], at + "/2"))};
  }

  ImageSource source(const json& v, const std::string& at) const {
    const std::string s = string(v, at);
    if (s == "procedural") return ImageSource::procedural;
    if (s == "constant") return ImageSource::constant;
    if (s == "directory") return ImageSource::directory;
    fail(at, "unknown source '" + s + "' (expected procedural, constant, directory)");
  }

  GenConfig read(const json& doc) const {
    only_keys(doc, "",
              {"schema", "sensor", "camera_distance_mm", "indenters", "positions_mm", "position_jitter_mm",
               "press_depth_mm", "grid", "amplitude_px", "jitter", "background", "blur_radius_px",
               "contact_threshold", "smoothing_sigma_mm", "calibration", "shadow", "light_map",
               "tactile_background", "object", "count", "seed", "max_attempts"});
    if (!doc.contains("schema")) fail("", "missing \"schema\": \"muxgen/1\"");
    if (string(doc["schema"], "/schema") != kConfigSchema)
      fail("/schema", "unsupported schema '" + doc["schema"].get<std::string>() + "' (expected muxgen/1)");

    GenConfig c;
    if (doc.contains("sensor")) {
      const json& s = doc["sensor"];
      only_keys(s, "/sensor", {"width_mm", "height_mm", "mm_per_px"});
      if (s.contains("width_mm")) c.sensor.width_mm = number(s["width_mm"], "/sensor/width_mm");
      if (s.contains("height_mm")) c.sensor.height_mm = number(s["height_mm"], "/sensor/height_mm");
      if (s.contains("mm_per_px")) c.sensor.mm_per_px = number(s["mm_per_px"], "/sensor/mm_per_px");
    }
    if (doc.contains("camera_distance_mm"))
      c.camera_distance_mm = number(doc["camera_distance_mm"], "/camera_distance_mm");
    if (doc.contains("indenters")) {
      const json& pool = doc["indenters"];
      if (!pool.is_array()) fail("/indenters", "expected an array");
      c.indenters.clear();
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const std::string at = "/indenters/" + std::to_string(i);
        const json& e = pool[i];
        only_keys(e, at, {"shape", "radius_mm", "inner_radius_mm", "side_mm", "half_angle_deg", "length_mm"});
        if (!e.contains("shape")) fail(at, "missing \"shape\"");
        IndenterPoolEntry entry;
        const std::string tag = string(e["shape"], at + "/shape");
        try {
          entry.shape = parse_indenter_shape(tag);
        } catch (const ConfigError& err) {
          fail(at + "/shape", err.what());
        }
        if (entry.shape == IndenterShape::hollow_octagon) entry.radius_mm = {3.5, 5.0};
        if (e.contains("radius_mm")) entry.radius_mm = range(e["radius_mm"], at + "/radius_mm");
        if (e.contains("inner_radius_mm")) entry.inner_radius_mm = range(e["inner_radius_mm"], at + "/inner_radius_mm");
        if (e.contains("side_mm")) entry.side_mm = range(e["side_mm"], at + "/side_mm");
        if (e.contains("half_angle_deg")) entry.half_angle_deg = range(e["half_angle_deg"], at + "/half_angle_deg");
        if (e.contains("length_mm")) entry.length_mm = range(e["length_mm"], at + "/length_mm");
        c.indenters.push_back(entry);
      }
    }
    if (doc.contains("positions_mm")) {
      const json& ps = doc["positions_mm"];
      if (!ps.is_array()) fail("/positions_mm", "expected an array of [x, y]");
      c.positions_mm.clear();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string at = "/positions_mm/" + std::to_string(i);
        if (!ps[i].is_array() || ps[i].size() != 2) fail(at, "expected [x, y]");
        c.positions_mm.push_back({number(ps[i][0], at + "/0"), number(ps[i][1], at + "/1")});
      }
    }
    if (doc.contains("position_jitter_mm"))
      c.position_jitter_mm = number(doc["position_jitter_mm"], "/position_jitter_mm");
    if (doc.contains("press_depth_mm")) c.press_depth_mm = range(doc["press_depth_mm"], "/press_depth_mm");
    if (doc.contains("grid")) {
      const json& g = doc["grid"];
      if (g.is_number_integer()) {
        c.grid = {g.get<int>(), g.get<int>()};
      } else {
        if (!g.is_array() || g.size() != 2) fail("/grid", "expected an integer or [lo, hi]");
        c.grid = {integer(g[0], "/grid/0"), integer(g[1], "/grid/1")};
      }
    }
    if (doc.contains("amplitude_px")) c.amplitude_px = range(doc["amplitude_px"], "/amplitude_px");
    if (doc.contains("jitter")) {
      const json& j = doc["jitter"];
      only_keys(j, "/jitter", {"brightness", "contrast", "saturation", "hue_deg"});
      if (j.contains("brightness")) c.jitter.brightness = range(j["brightness"], "/jitter/brightness");
      if (j.contains("contrast")) c.jitter.contrast = range(j["contrast"], "/jitter/contrast");
      if (j.contains("saturation")) c.jitter.saturation = range(j["saturation"], "/jitter/saturation");
      if (j.contains("hue_deg")) c.jitter.hue_deg = range(j["hue_deg"], "/jitter/hue_deg");
    }
    if (doc.contains("background")) {
      const json& b = doc["background"];
      if (b.is_string()) {
        const std::string s = b.get<std::string>();
        if (s == "procedural") {
          c.background.source = ImageSource::procedural;
        } else {
          c.background.source = ImageSource::directory;
          c.background.path = path(b, "/background");
        }
      } else {
        only_keys(b, "/background", {"source", "color", "path"});
        if (b.contains("source")) c.background.source = source(b["source"], "/background/source");
        if (b.contains("color")) c.background.color = color(b["color"], "/background/color");
        if (b.contains("path")) c.background.path = path(b["path"], "/background/path");
      }
    }
    if (doc.contains("blur_radius_px")) c.blur_radius_px = range(doc["blur_radius_px"], "/blur_radius_px");
    if (doc.contains("contact_threshold"))
      c.contact_threshold = number(doc["contact_threshold"], "/contact_threshold");
    if (doc.contains("smoothing_sigma_mm"))
      c.smoothing_sigma_mm = number(doc["smoothing_sigma_mm"], "/smoothing_sigma_mm");
    if (doc.contains("calibration")) {
      const json& k = doc["calibration"];
      only_keys(k, "/calibration", {"magnitude_bins", "angle_bins", "file"});
      if (k.contains("magnitude_bins"))
        c.calibration.magnitude_bins = integer(k["magnitude_bins"], "/calibration/magnitude_bins");
      if (k.contains("angle_bins")) c.calibration.angle_bins = integer(k["angle_bins"], "/calibration/angle_bins");
      if (k.contains("file")) c.calibration.file = path(k["file"], "/calibration/file");
    }
    if (doc.contains("shadow")) {
      const json& s = doc["shadow"];
      only_keys(s, "/shadow", {"march_px", "attenuation", "elevation_deg"});
      if (s.contains("march_px")) c.shadow.march_px = integer(s["march_px"], "/shadow/march_px");
      if (s.contains("attenuation")) c.shadow.attenuation = number(s["attenuation"], "/shadow/attenuation");
      if (s.contains("elevation_deg")) c.shadow.elevation_deg = number(s["elevation_deg"], "/shadow/elevation_deg");
    }
    if (doc.contains("light_map")) {
      const json& l = doc["light_map"];
      only_keys(l, "/light_map", {"vignette_exponent", "edge_attenuation", "file"});
      if (l.contains("vignette_exponent"))
        c.light_map.vignette_exponent = number(l["vignette_exponent"], "/light_map/vignette_exponent");
      if (l.contains("edge_attenuation"))
        c.light_map.edge_attenuation = number(l["edge_attenuation"], "/light_map/edge_attenuation");
      if (l.contains("file")) c.light_map.file = path(l["file"], "/light_map/file");
    }
    if (doc.contains("tactile_background")) {
      const json& t = doc["tactile_background"];
      only_keys(t, "/tactile_background", {"source", "path", "gain_variation", "grain"});
      if (t.contains("source")) c.tactile_background.source = source(t["source"], "/tactile_background/source");
      if (t.contains("path")) c.tactile_background.path = path(t["path"], "/tactile_background/path");
      if (t.contains("gain_variation"))
        c.tactile_background.gain_variation = number(t["gain_variation"], "/tactile_background/gain_variation");
      if (t.contains("grain")) c.tactile_background.grain = number(t["grain"], "/tactile_background/grain");
    }
    if (doc.contains("object")) {
      const json& o = doc["object"];
      only_keys(o, "/object", {"colors", "texture", "shading", "reach_mm"});
      if (o.contains("colors")) {
        if (!o["colors"].is_array()) fail("/object/colors", "expected an array of [r, g, b]");
        c.object.colors.clear();
        for (std::size_t i = 0; i < o["colors"].size(); ++i)
          c.object.colors.push_back(color(o["colors"][i], "/object/colors/" + std::to_string(i)));
      }
      if (o.contains("texture")) c.object.texture = number(o["texture"], "/object/texture");
      if (o.contains("shading")) c.object.shading = number(o["shading"], "/object/shading");
      if (o.contains("reach_mm")) c.object.reach_mm = number(o["reach_mm"], "/object/reach_mm");
    }
    if (doc.contains("count")) {
      const json& n = doc["count"];
      if (!n.is_number_unsigned()) fail("/count", "expected a non-negative integer");
      c.count = n.get<std::size_t>();
    }
    if (doc.contains("seed")) {
      const json& s = doc["seed"];
      if (!s.is_number_unsigned()) fail("/seed", "expected a non-negative integer");
      c.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("max_attempts")) c.max_attempts = integer(doc["max_attempts"], "/max_attempts");

    if (auto issue = c.check()) fail(issue->path, issue->message);
    return c;
  }

 private:
  std::string where_;
  std::filesystem::path base_;
  KeyLocator locator_;
};

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace detail

/// Parses config text. `where` names the source in diagnostics; relative
/// paths inside the document resolve against `base_dir`.
inline GenConfig parse_config(const std::string& text, const std::string& where = "<config>",
                              const std::filesystem::path& base_dir = ".") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    const auto colon = what.find("parse error");
    if (colon != std::string::npos) what = what.substr(colon);
    throw ConfigError(where + ":" + std::to_string(detail::line_of_offset(text, at)) + ": " + what);
  }
  return detail::ConfigReader(text, where, base_dir).read(doc);
}

inline GenConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

namespace detail {

inline nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

inline nlohmann::json color_json(const Rgb& c) { return nlohmann::json::array({c[0], c[1], c[2]}); }

inline std::string_view to_string(ImageSource s) {
  switch (s) {
    case ImageSource::procedural: return "procedural";
    case ImageSource::constant: return "constant";
    case ImageSource::directory: return "directory";
  }
  return "?";
}

}  // namespace detail

/// Complete snapshot; parse_config(config_to_json(c).dump()) reproduces c.
inline nlohmann::json config_to_json(const GenConfig& c) {
  using nlohmann::json;
  using detail::range_json;
  json j;
  j["schema"] = kConfigSchema;
  j["sensor"] = {{"width_mm", c.sensor.width_mm}, {"height_mm", c.sensor.height_mm}, {"mm_per_px", c.sensor.mm_per_px}};
  j["camera_distance_mm"] = c.camera_distance_mm;
  j["indenters"] = json::array();
  for (const auto& e : c.indenters)
    j["indenters"].push_back({{"shape", std::string(to_string(e.shape))},
                              {"radius_mm", range_json(e.radius_mm)},
                              {"inner_radius_mm", range_json(e.inner_radius_mm)},
                              {"side_mm", range_json(e.side_mm)},
                              {"half_angle_deg", range_json(e.half_angle_deg)},
                              {"length_mm", range_json(e.length_mm)}});
  j["positions_mm"] = json::array();
  for (const auto& p : c.positions_mm) j["positions_mm"].push_back({p[0], p[1]});
  j["position_jitter_mm"] = c.position_jitter_mm;
  j["press_depth_mm"] = range_json(c.press_depth_mm);
  j["grid"] = {c.grid[0], c.grid[1]};
  j["amplitude_px"] = range_json(c.amplitude_px);
  j["jitter"] = {{"brightness", range_json(c.jitter.brightness)},
                 {"contrast", range_json(c.jitter.contrast)},
                 {"saturation", range_json(c.jitter.saturation)},
                 {"hue_deg", range_json(c.jitter.hue_deg)}};
  j["background"] = {{"source", std::string(detail::to_string(c.background.source))},
                     {"color", detail::color_json(c.background.color)},
                     {"path", c.background.path}};
  j["blur_radius_px"] = range_json(c.blur_radius_px);
  j["contact_threshold"] = c.contact_threshold;
  j["smoothing_sigma_mm"] = c.smoothing_sigma_mm;
  j["calibration"] = {{"magnitude_bins", c.calibration.magnitude_bins},
                      {"angle_bins", c.calibration.angle_bins},
                      {"file", c.calibration.file}};
  j["shadow"] = {{"march_px", c.shadow.march_px},
                 {"attenuation", c.shadow.attenuation},
                 {"elevation_deg", c.shadow.elevation_deg}};
  j["light_map"] = {{"vignette_exponent", c.light_map.vignette_exponent},
                    {"edge_attenuation", c.light_map.edge_attenuation},
                    {"file", c.light_map.file}};
  j["tactile_background"] = {{"source", std::string(detail::to_string(c.tactile_background.source))},
                             {"path", c.tactile_background.path},
                             {"gain_variation", c.tactile_background.gain_variation},
                             {"grain", c.tactile_background.grain}};
  json colors = json::array();
  for (const auto& col : c.object.colors) colors.push_back(detail::color_json(col));
  j["object"] = {{"colors", colors},
                 {"texture", c.object.texture},
                 {"shading", c.object.shading},
                 {"reach_mm", c.object.reach_mm}};
  j["count"] = c.count;
  if (c.seed) j["seed"] = *c.seed;
  j["max_attempts"] = c.max_attempts;
  return j;
}

}  // namespace muxgel
