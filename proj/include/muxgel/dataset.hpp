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

// On-disk samples, manifests and the generate / demux / evaluate / score
// commands.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "muxgel/config.hpp"
#include "muxgel/demux.hpp"
#include "muxgel/error.hpp"
#include "muxgel/image_io.hpp"
#include "muxgel/metrics.hpp"
#include "muxgel/pipeline.hpp"

namespace muxgel {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kToolVersion = "0.1.0";
constexpr std::string_view kManifestName = "manifest.json";
constexpr std::string_view kDemuxRunName = "demux_run.json";

inline std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

/// File suffixes of one stored sample.
struct SampleFiles {
  static constexpr const char* mux = "_mux.png";
  static constexpr const char* ref = "_ref.png";
  static constexpr const char* vis = "_vis.png";
  static constexpr const char* tac = "_tac.png";
  static constexpr const char* res = "_res.muxf";
  static constexpr const char* mc = "_mc.png";
  static constexpr const char* mwavy = "_mwavy.png";
  static constexpr const char* meta = "_meta.json";
  static constexpr const char* tbg = "_tbg.png";
  static constexpr const char* lv = "_lv.png";
  static constexpr const char* vis_hat = "_vis_hat.png";
  static constexpr const char* tac_hat = "_tac_hat.png";
  static constexpr const char* res_hat = "_res_hat.muxf";
};

// ---------------------------------------------------------------------------
// JSON views of provenance

inline json to_json(const IndenterSpec& s) {
  return {{"shape", std::string(to_string(s.shape))}, {"radius_mm", s.radius_mm},
          {"inner_radius_mm", s.inner_radius_mm},     {"side_mm", s.side_mm},
          {"half_angle_deg", s.half_angle_deg},       {"length_mm", s.length_mm},
          {"x_mm", s.x_mm},                           {"y_mm", s.y_mm},
          {"press_depth_mm", s.press_depth_mm}};
}

inline json to_json(const JitterParams& p) {
  return {{"brightness", p.brightness}, {"contrast", p.contrast}, {"saturation", p.saturation},
          {"hue_deg", p.hue_deg}};
}

inline JitterParams jitter_from_json(const json& j) {
  return {j.at("brightness").get<double>(), j.at("contrast").get<double>(),
          j.at("saturation").get<double>(), j.at("hue_deg").get<double>()};
}

inline json to_json(const WavySpec& s) {
  auto waves = [](const std::vector<BoundaryWave>& v) {
    json a = json::array();
    for (const auto& b : v) a.push_back({{"amplitude", b.amplitude}, {"frequency", b.frequency}, {"phase", b.phase}});
    return a;
  };
  return {{"grid", s.grid}, {"vertical", waves(s.vertical)}, {"horizontal", waves(s.horizontal)}};
}

inline WavySpec wavy_from_json(const json& j) {
  WavySpec s;
  s.grid = j.at("grid").get<int>();
  for (const char* key : {"vertical", "horizontal"}) {
    auto& dst = std::string_view(key) == "vertical" ? s.vertical : s.horizontal;
    for (const auto& b : j.at(key))
      dst.push_back({b.at("amplitude").get<double>(), b.at("frequency").get<double>(), b.at("phase").get<double>()});
  }
  return s;
}

inline json sample_meta(const MuxSample& s, const std::string& id, std::size_t index, int attempt) {
  return {{"id", id},
          {"index", index},
          {"attempt", attempt},
          {"seed", s.seed},
          {"width", s.i_mux.width()},
          {"height", s.i_mux.height()},
          {"indenter", to_json(s.indenter)},
          {"jitter", to_json(s.jitter)},
          {"wavy", to_json(s.wavy)},
          {"blur_radius_px", s.blur_radius_px},
          {"contact_ratio", s.contact_ratio},
          {"saturated_pixels", s.saturated_pixels}};
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

inline json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ContractError(path.string() + ": " + e.what());
  }
}

/// Writes to a temporary sibling and renames over the target.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

/// Stores every artifact of one accepted sample; returns suffix -> file name.
inline std::map<std::string, std::string> write_sample(const fs::path& dir, const std::string& id,
                                                       const MuxSample& s, std::size_t index, int attempt) {
  std::map<std::string, std::string> files;
  auto out = [&](const char* key, const char* suffix) {
    files[key] = id + suffix;
    return dir / (id + suffix);
  };
  write_png(out("mux", SampleFiles::mux), s.i_mux);
  write_png(out("ref", SampleFiles::ref), s.i_ref);
  write_png(out("vis", SampleFiles::vis), s.target_vision);
  write_png(out("tac", SampleFiles::tac), s.target_tactile);
  write_muxf(out("res", SampleFiles::res), s.target_residual);
  write_png(out("mc", SampleFiles::mc), s.m_c);
  write_png(out("mwavy", SampleFiles::mwavy), s.m_wavy);
  write_png(out("tbg", SampleFiles::tbg), s.t_bg_jit);
  write_png(out("lv", SampleFiles::lv), s.l_v);
  write_text(out("meta", SampleFiles::meta), sample_meta(s, id, index, attempt).dump(2) + "\n");
  return files;
}

/// A sample as read back from disk (8-bit images, float residual).
struct StoredSample {
  std::string id;
  json meta;
  int grid = 0;
  Image i_mux, i_ref, vision, tactile, t_bg, l_v;
  Image residual;
  Mask m_c, m_wavy, m_stg;
};

inline fs::path require_file(const fs::path& dir, const std::string& id, const char* suffix, const char* what) {
  fs::path p = dir / (id + suffix);
  if (!fs::exists(p)) throw ContractError("sample " + id + ": missing " + what + " (" + p.string() + ")");
  return p;
}

/// Loads one sample and checks both reconstruction identities.
inline StoredSample load_sample(const fs::path& dir, const std::string& id) {
  StoredSample s;
  s.id = id;
  s.meta = read_json_file(require_file(dir, id, SampleFiles::meta, "metadata"));
  s.grid = s.meta.at("wavy").at("grid").get<int>();
  s.i_mux = read_png(require_file(dir, id, SampleFiles::mux, "multiplexed image"));
  s.i_ref = read_png(require_file(dir, id, SampleFiles::ref, "reference image"));
  s.vision = read_png(require_file(dir, id, SampleFiles::vis, "vision target"));
  s.tactile = read_png(require_file(dir, id, SampleFiles::tac, "tactile target"));
  s.residual = read_muxf(require_file(dir, id, SampleFiles::res, "residual target"), true);
  s.m_c = read_png_mask(require_file(dir, id, SampleFiles::mc, "contact mask"));
  s.m_wavy = read_png_mask(require_file(dir, id, SampleFiles::mwavy, "wavy mask"));
  s.t_bg = read_png(require_file(dir, id, SampleFiles::tbg, "tactile background"));
  s.l_v = read_png(require_file(dir, id, SampleFiles::lv, "light map"));
  s.m_stg = straight_mask(s.grid, s.grid, s.i_mux.width(), s.i_mux.height());
  if (!bit_equal(s.i_mux, mask_blend(s.m_wavy, s.tactile, s.vision)))
    throw ContractError("sample " + id + ": multiplexed image does not match its targets and wavy mask");
  if (!bit_equal(s.i_ref, mask_blend(s.m_stg, s.t_bg, s.l_v)))
    throw ContractError("sample " + id + ": reference image does not match background, light map and layout");
  return s;
}

// ---------------------------------------------------------------------------
// Manifest

struct SampleRecord {
  std::string id;
  std::size_t index = 0;
  int attempt = 0;
  std::uint64_t seed = 0;
  bool accepted = false;
  double contact_ratio = 0.0;
  std::map<std::string, std::string> files;
};

struct Manifest {
  json config;
  std::uint64_t global_seed = 0;
  std::size_t count = 0;
  bool complete = true;
  std::vector<SampleRecord> records;  // accepted and rejected attempts
  std::string version{kToolVersion};
  std::string created;

  std::size_t accepted() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](auto& r) { return r.accepted; }));
  }
  std::size_t rejected() const { return records.size() - accepted(); }

  std::vector<std::string> accepted_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : records)
      if (r.accepted) ids.push_back(r.id);
    return ids;
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json to_json(const Manifest& m) {
  json records = json::array();
  for (const auto& r : m.records) {
    json j = {{"id", r.id},         {"index", r.index},       {"attempt", r.attempt},
              {"seed", r.seed},     {"accepted", r.accepted}, {"contact_ratio", r.contact_ratio}};
    if (r.accepted) j["files"] = r.files;
    records.push_back(std::move(j));
  }
  return {{"tool", "muxgel"},          {"version", m.version},   {"created", m.created},
          {"global_seed", m.global_seed}, {"count", m.count},   {"complete", m.complete},
          {"accepted", m.accepted()},  {"rejected", m.rejected()}, {"config", m.config},
          {"records", records}};
}

inline Manifest read_manifest(const fs::path& dir) {
  const fs::path p = dir / kManifestName;
  if (!fs::exists(p)) throw IoError("no manifest in " + dir.string() + " (expected " + p.string() + ")");
  const json j = read_json_file(p);
  Manifest m;
  try {
    m.config = j.at("config");
    m.global_seed = j.at("global_seed").get<std::uint64_t>();
    m.count = j.at("count").get<std::size_t>();
    m.complete = j.at("complete").get<bool>();
    m.version = j.at("version").get<std::string>();
    m.created = j.at("created").get<std::string>();
    for (const auto& r : j.at("records")) {
      SampleRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.index = r.at("index").get<std::size_t>();
      rec.attempt = r.at("attempt").get<int>();
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.accepted = r.at("accepted").get<bool>();
      rec.contact_ratio = r.at("contact_ratio").get<double>();
      if (rec.accepted) rec.files = r.at("files").get<std::map<std::string, std::string>>();
      m.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ContractError(p.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

/// Every accepted record's files exist and pass the reconstruction identities.
inline void verify_manifest(const fs::path& dir, const Manifest& m) {
  for (const auto& r : m.records) {
    if (!r.accepted) continue;
    for (const auto& [key, name] : r.files)
      if (!fs::exists(dir / name)) throw ContractError("sample " + r.id + ": missing " + key + " file " + name);
    load_sample(dir, r.id);
  }
}

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(i) for i in [0, n) on `jobs` threads. Indices are claimed from a
/// shared counter; results must be stored by index. The first exception is
/// rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      while (!stop) {
        const std::size_t i = next++;
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          stop = true;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  fs::path out;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

/// Seed precedence: explicit option, config document, MUXGEL_SEED.
inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const GenConfig& cfg) {
  if (flag) return *flag;
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("MUXGEL_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used, 0);
      if (used == std::string_view(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("MUXGEL_SEED is not an unsigned integer: '") + env + "'");
  }
  throw ConfigError("no seed: pass --seed, set \"seed\" in the config, or export MUXGEL_SEED");
}

/// Writes `count` accepted samples plus the manifest. An index that exhausts
/// max_attempts leaves an incomplete manifest behind and raises ContractError.
inline Manifest cmd_generate(const GenConfig& cfg_in, const GenerateOptions& opt) {
  GenConfig cfg = cfg_in;
  if (opt.count) cfg.count = *opt.count;
  const std::uint64_t global = resolve_seed(opt.seed, cfg);
  cfg.seed = global;
  cfg.validate();

  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec || !fs::is_directory(opt.out))
    throw IoError("cannot create output directory " + opt.out.string() + (ec ? ": " + ec.message() : ""));
  {
    const fs::path probe = opt.out / ".muxgel_write_probe";
    std::ofstream f(probe);
    if (!f) throw IoError("output directory is not writable: " + opt.out.string());
    f.close();
    fs::remove(probe, ec);
  }

  const SceneAssets assets = prepare_assets(cfg);
  struct Outcome {
    std::vector<SampleRecord> records;
    bool done = false;
  };
  std::vector<Outcome> outcomes(cfg.count);
  parallel_for(cfg.count, opt.jobs, [&](std::size_t i) {
    Outcome& o = outcomes[i];
    const std::string id = sample_id(i);
    for (int a = 0; a < cfg.max_attempts; ++a) {
      const std::uint64_t seed = sample_seed(global, i, static_cast<std::uint64_t>(a));
      SynthesisResult r = synthesize_sample(cfg, assets, seed);
      SampleRecord rec;
      rec.id = id;
      rec.index = i;
      rec.attempt = a;
      rec.seed = seed;
      rec.contact_ratio = r.rejection.contact_ratio;
      if (r.accepted()) {
        rec.accepted = true;
        rec.files = write_sample(opt.out, id, *r.sample, i, a);
        o.records.push_back(std::move(rec));
        o.done = true;
        return;
      }
      o.records.push_back(std::move(rec));
    }
  });

  Manifest m;
  m.config = config_to_json(cfg);
  m.global_seed = global;
  m.count = cfg.count;
  m.created = utc_timestamp();
  std::vector<std::string> failed;
  for (auto& o : outcomes) {
    if (!o.done) failed.push_back(o.records.empty() ? "?" : o.records.front().id);
    for (auto& r : o.records) m.records.push_back(std::move(r));
  }
  m.complete = failed.empty();
  write_text_atomic(opt.out / kManifestName, to_json(m).dump(2) + "\n");
  if (!failed.empty()) {
    std::string list;
    for (std::size_t k = 0; k < failed.size() && k < 10; ++k) list += (k ? ", " : "") + failed[k];
    if (failed.size() > 10) list += ", ...";
    throw ContractError(std::to_string(failed.size()) + " sample(s) found no accepted scene within " +
                        std::to_string(cfg.max_attempts) + " attempts (" + list + "); " +
                        std::to_string(m.rejected()) + " rejections recorded in the manifest");
  }
  return m;
}

// ---------------------------------------------------------------------------
// demux

struct DemuxOptions {
  fs::path in;
  fs::path out;
  DemuxMode mode = DemuxMode::di_rest;
  MaskSource mask = MaskSource::nominal;
  DemuxParams params;
  int jobs = 1;
};

inline json cmd_demux(const DemuxOptions& opt) {
  const Manifest m = read_manifest(opt.in);
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec || !fs::is_directory(opt.out)) throw IoError("cannot create output directory " + opt.out.string());
  const auto ids = m.accepted_ids();
  parallel_for(ids.size(), opt.jobs, [&](std::size_t k) {
    const std::string& id = ids[k];
    if (opt.mode == DemuxMode::di_rest)
      require_file(opt.in, id, SampleFiles::tbg, "tactile background required by di-rest");
    const StoredSample s = load_sample(opt.in, id);
    DemuxInputs in;
    in.i_mux = s.i_mux;
    in.grid = s.grid;
    if (opt.mode != DemuxMode::si) in.i_ref = s.i_ref;
    if (opt.mode == DemuxMode::di_rest) in.t_bg = s.t_bg;
    if (opt.mask == MaskSource::provided) in.true_mask = s.m_wavy;
    const DemuxResult r = demux(in, opt.mode, opt.mask, opt.params);
    write_png(opt.out / (id + SampleFiles::vis_hat), r.vision);
    write_png(opt.out / (id + SampleFiles::tac_hat), r.tactile);
    if (r.residual) write_muxf(opt.out / (id + SampleFiles::res_hat), *r.residual);
  });
  json run = {{"tool", "muxgel"},
              {"version", kToolVersion},
              {"source", opt.in.string()},
              {"mode", std::string(to_string(opt.mode))},
              {"mask", opt.mask == MaskSource::provided ? "provided" : "nominal"},
              {"sigma_px", opt.params.sigma_px},
              {"sigma_rule", opt.params.sigma_px > 0 ? "fixed" : "half-cell"},
              {"iterations", opt.params.iterations},
              {"order", opt.params.order == NcOrder::linear ? "linear" : "constant"},
              {"samples", ids}};
  write_text_atomic(opt.out / kDemuxRunName, run.dump(2) + "\n");
  return run;
}

// ---------------------------------------------------------------------------
// evaluate

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const MetricsReport& r, bool with_pseudo) {
  json j = {{"name", r.name},
            {"rmse_t", r.tactile.rmse},
            {"one_minus_ssim_t", r.tactile.one_minus_ssim},
            {"lpips_t", optional_json(r.tactile.lpips)},
            {"psnr_t", r.tactile.psnr},
            {"rmse_v", r.vision.rmse},
            {"one_minus_ssim_v", r.vision.one_minus_ssim},
            {"lpips_v", optional_json(r.vision.lpips)},
            {"psnr_v", r.vision.psnr},
            {"score_s", optional_json(r.score())}};
  if (with_pseudo) {
    j["pseudo_lpips_t"] = optional_json(r.tactile.pseudo_lpips);
    j["pseudo_lpips_v"] = optional_json(r.vision.pseudo_lpips);
  }
  return j;
}

struct EvaluateOptions {
  fs::path pred;
  fs::path truth;
  std::optional<fs::path> lpips_file;
  bool pseudo_lpips = false;
  std::string name;  // defaults to the run mode or the prediction directory name
};

/// Prediction ids: the run descriptor if present, else every *_vis_hat.png.
inline std::vector<std::string> prediction_ids(const fs::path& pred) {
  std::set<std::string> ids;
  const fs::path run = pred / kDemuxRunName;
  if (fs::exists(run)) {
    const json doc = read_json_file(run);
    for (const auto& id : doc.at("samples")) ids.insert(id.get<std::string>());
  } else {
    if (!fs::is_directory(pred)) throw IoError("prediction directory not found: " + pred.string());
    const std::string suffix = SampleFiles::vis_hat;
    for (const auto& e : fs::directory_iterator(pred)) {
      const std::string f = e.path().filename().string();
      if (f.size() > suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0)
        ids.insert(f.substr(0, f.size() - suffix.size()));
    }
  }
  return {ids.begin(), ids.end()};
}

inline json cmd_evaluate(const EvaluateOptions& opt) {
  const Manifest m = read_manifest(opt.truth);
  auto truth_ids = m.accepted_ids();
  std::sort(truth_ids.begin(), truth_ids.end());
  const auto pred_ids = prediction_ids(opt.pred);
  std::vector<std::string> missing, extra;
  std::set_difference(truth_ids.begin(), truth_ids.end(), pred_ids.begin(), pred_ids.end(), std::back_inserter(missing));
  std::set_difference(pred_ids.begin(), pred_ids.end(), truth_ids.begin(), truth_ids.end(), std::back_inserter(extra));
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "prediction and truth ids do not align;";
    if (!missing.empty()) {
      msg += " missing predictions:";
      for (const auto& id : missing) msg += " " + id;
      msg += ";";
    }
    if (!extra.empty()) {
      msg += " predictions without truth:";
      for (const auto& id : extra) msg += " " + id;
    }
    throw ContractError(msg);
  }

  json lpips;
  if (opt.lpips_file) {
    lpips = read_json_file(*opt.lpips_file);
    std::vector<std::string> absent;
    for (const auto& id : truth_ids)
      if (!lpips.contains(id) || !lpips[id].contains("lpips_t") || !lpips[id].contains("lpips_v")) absent.push_back(id);
    if (!absent.empty()) {
      std::string msg = opt.lpips_file->string() + ": no lpips_t/lpips_v for:";
      for (const auto& id : absent) msg += " " + id;
      throw ContractError(msg);
    }
  }

  std::string name = opt.name;
  if (name.empty() && fs::exists(opt.pred / kDemuxRunName))
    name = read_json_file(opt.pred / kDemuxRunName).value("mode", "");
  if (name.empty()) name = fs::path(opt.pred).lexically_normal().filename().string();

  std::vector<MetricsReport> reports;
  json samples = json::array();
  for (const auto& id : truth_ids) {
    MetricsReport r;
    r.name = id;
    const Image vt = read_png(require_file(opt.truth, id, SampleFiles::vis, "vision target"));
    const Image tt = read_png(require_file(opt.truth, id, SampleFiles::tac, "tactile target"));
    const Image vp = read_png(require_file(opt.pred, id, SampleFiles::vis_hat, "vision prediction"));
    const Image tp = read_png(require_file(opt.pred, id, SampleFiles::tac_hat, "tactile prediction"));
    if (!vp.same_shape(vt) || !tp.same_shape(tt)) throw ContractError("sample " + id + ": prediction shape differs from truth");
    r.vision = measure(vp, vt, opt.pseudo_lpips);
    r.tactile = measure(tp, tt, opt.pseudo_lpips);
    if (opt.lpips_file) {
      r.tactile.lpips = lpips[id]["lpips_t"].get<double>();
      r.vision.lpips = lpips[id]["lpips_v"].get<double>();
    }
    samples.push_back(to_json(r, opt.pseudo_lpips));
    reports.push_back(std::move(r));
  }
  MetricsReport agg = mean_report(reports);
  agg.name = name;
  return {{"name", name}, {"count", reports.size()}, {"aggregate", to_json(agg, opt.pseudo_lpips)}, {"samples", samples}};
}

// ---------------------------------------------------------------------------
// score

struct Candidate {
  std::string name;
  double ssim_t = 0, lpips_t = 0, ssim_v = 0, lpips_v = 0;
  double score = 0;
};

namespace detail {

inline std::optional<double> number_field(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_number()) return std::nullopt;
  return j[key].get<double>();
}

inline Candidate candidate_from(const json& j, const std::string& name, bool pseudo_lpips,
                                const std::string& where) {
  Candidate c;
  c.name = name;
  std::vector<std::string> missing;
  auto ssim = [&](const char* mod) -> double {
    const std::string s = std::string("ssim_") + mod;
    const std::string oms = std::string("one_minus_ssim_") + mod;
    if (auto v = number_field(j, s)) return *v;
    if (auto v = number_field(j, oms)) return 1.0 - *v;
    missing.push_back(oms);
    return 0.0;
  };
  auto lp = [&](const char* mod) -> double {
    const std::string key = std::string("lpips_") + mod;
    if (auto v = number_field(j, key)) return *v;
    if (pseudo_lpips)
      if (auto v = number_field(j, "pseudo_" + key)) return *v;
    missing.push_back(key);
    return 0.0;
  };
  c.ssim_t = ssim("t");
  c.lpips_t = lp("t");
  c.ssim_v = ssim("v");
  c.lpips_v = lp("v");
  if (!missing.empty()) {
    std::string msg = where + ": candidate '" + name + "' is missing";
    for (const auto& k : missing) msg += " " + k;
    throw ContractError(msg);
  }
  return c;
}

}  // namespace detail

/// Reads candidates from a metrics file: a {"candidates": [...]} document, an
/// array of candidate objects, an evaluate report ({"aggregate": ...}) or a
/// single flat object. Unnamed candidates take the file stem.
inline std::vector<Candidate> read_candidates(const fs::path& path, bool pseudo_lpips = false) {
  const json j = read_json_file(path);
  const std::string stem = path.stem().string();
  std::vector<Candidate> out;
  auto add = [&](const json& obj, const std::string& fallback) {
    if (!obj.is_object()) throw ContractError(path.string() + ": candidate entries must be objects");
    const std::string name = obj.contains("name") && obj["name"].is_string() ? obj["name"].get<std::string>() : fallback;
    out.push_back(detail::candidate_from(obj, name, pseudo_lpips, path.string()));
  };
  const json* list = nullptr;
  if (j.is_array()) list = &j;
  else if (j.is_object() && j.contains("candidates")) list = &j["candidates"];
  if (list) {
    for (std::size_t i = 0; i < list->size(); ++i)
      add((*list)[i], list->size() == 1 ? stem : stem + "#" + std::to_string(i));
  } else if (j.is_object() && j.contains("aggregate")) {
    json agg = j["aggregate"];
    if (j.contains("name") && j["name"].is_string()) agg["name"] = j["name"];
    add(agg, stem);
  } else {
    add(j, stem);
  }
  return out;
}

/// Descending score; equal scores rank by name.
inline std::vector<Candidate> rank_candidates(std::vector<Candidate> cs, const ScoreWeights& w = {}) {
  for (auto& c : cs) c.score = selection_score(c.ssim_t, c.lpips_t, c.ssim_v, c.lpips_v, w);
  std::sort(cs.begin(), cs.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  return cs;
}

struct ScoreOptions {
  std::vector<fs::path> metrics;
  ScoreWeights weights;
  bool pseudo_lpips = false;
};

inline std::vector<Candidate> cmd_score(const ScoreOptions& opt) {
  if (opt.metrics.empty()) throw ConfigError("score: no metrics files given");
  std::vector<Candidate> all;
  for (const auto& p : opt.metrics) {
    auto cs = read_candidates(p, opt.pseudo_lpips);
    all.insert(all.end(), cs.begin(), cs.end());
  }
  return rank_candidates(std::move(all), opt.weights);
}

inline std::string format_ranking(const std::vector<Candidate>& ranked) {
  std::size_t width = 9;
  for (const auto& c : ranked) width = std::max(width, c.name.size());
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-4s  %-*s  %8s  %8s  %8s  %8s  %8s\n", "rank", static_cast<int>(width),
                "candidate", "S", "ssim_t", "lpips_t", "ssim_v", "lpips_v");
  out += line;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = ranked[i];
    std::snprintf(line, sizeof line, "%-4zu  %-*s  %8.5f  %8.4f  %8.4f  %8.4f  %8.4f\n", i + 1,
                  static_cast<int>(width), c.name.c_str(), c.score, c.ssim_t, c.lpips_t, c.ssim_v, c.lpips_v);
    out += line;
  }
  return out;
}

inline json ranking_json(const std::vector<Candidate>& ranked, const ScoreWeights& w) {
  json rows = json::array();
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = ranked[i];
    rows.push_back({{"rank", i + 1}, {"name", c.name}, {"score_s", c.score}, {"ssim_t", c.ssim_t},
                    {"lpips_t", c.lpips_t}, {"ssim_v", c.ssim_v}, {"lpips_v", c.lpips_v}});
  }
  return {{"weights", {{"w_ts", w.w_ts}, {"w_tl", w.w_tl}, {"w_vs", w.w_vs}, {"w_vl", w.w_vl}}}, {"ranking", rows}};
}

}  // namespace muxgel
