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

// `muxgel generate|demux|evaluate|score`.
//
// Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 data-contract
// violation, 1 anything else.

#pragma once

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "muxgel/config.hpp"
#include "muxgel/dataset.hpp"

namespace muxgel {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3, kExitContract = 4 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ContractError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kExitContract;
  return kExitFailure;
}

inline ScoreWeights parse_weights(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--weights: '" + item + "' is not a number");
    }
  }
  if (v.size() != 4) throw ConfigError("--weights expects four comma-separated values w_ts,w_tl,w_vs,w_vl");
  return {v[0], v[1], v[2], v[3]};
}

inline void emit_json(const json& j, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    write_text_atomic(out_path, j.dump(2) + "\n");
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Synthetic visuotactile multiplexing: generate, demultiplex, evaluate, score"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  GenerateOptions gen;
  std::string gen_out;
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Synthesize a dataset from a config");
  generate->add_option("config", config_path, "Config file (JSON, schema muxgen/1)")->required();
  generate->add_option("--out", gen_out, "Output directory")->required();
  auto* count_opt = generate->add_option("--count", gen_count, "Accepted samples to write (overrides config)");
  auto* seed_opt = generate->add_option("--seed", gen_seed, "Global seed (overrides config and MUXGEL_SEED)");
  generate->add_option("--jobs,-j", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);

  DemuxOptions dmx;
  std::string dmx_in, dmx_out, dmx_mode = "di-rest", dmx_mask = "nominal", dmx_order = "linear";
  auto* demux_cmd = app.add_subcommand("demux", "Reconstruct vision and tactile images");
  demux_cmd->add_option("--in", dmx_in, "Dataset directory")->required();
  demux_cmd->add_option("--out", dmx_out, "Output directory")->required();
  demux_cmd->add_option("--mode", dmx_mode, "si, di-abst or di-rest");
  demux_cmd->add_option("--mask", dmx_mask, "nominal or provided");
  demux_cmd->add_option("--sigma", dmx.params.sigma_px, "Inpainting sigma in pixels (0: half a cell)");
  demux_cmd->add_option("--iterations", dmx.params.iterations, "Inpainting passes")->check(CLI::PositiveNumber);
  demux_cmd->add_option("--order", dmx_order, "linear or constant");
  demux_cmd->add_option("--jobs,-j", dmx.jobs, "Worker threads")->check(CLI::PositiveNumber);

  EvaluateOptions ev;
  std::string ev_pred, ev_truth, ev_lpips, ev_out;
  auto* evaluate = app.add_subcommand("evaluate", "Compare reconstructions against targets");
  evaluate->add_option("--pred", ev_pred, "Reconstruction directory")->required();
  evaluate->add_option("--truth", ev_truth, "Dataset directory")->required();
  evaluate->add_option("--lpips-file", ev_lpips, "JSON {id: {lpips_t, lpips_v}} with external LPIPS values");
  evaluate->add_flag("--pseudo-lpips", ev.pseudo_lpips, "Also report the built-in pyramid distance");
  evaluate->add_option("--name", ev.name, "Candidate name recorded in the report");
  evaluate->add_option("--out", ev_out, "Report file (default: stdout)");

  ScoreOptions sc;
  std::vector<std::string> sc_files;
  std::string sc_weights, sc_out;
  auto* score = app.add_subcommand("score", "Rank candidates by the selection score");
  score->add_option("--metrics", sc_files, "Metrics files")->required();
  score->add_option("--weights", sc_weights, "w_ts,w_tl,w_vs,w_vl (default 1.0,0.8,0.5,0.4)");
  score->add_flag("--pseudo-lpips", sc.pseudo_lpips, "Use pseudo_lpips_* when lpips_* is absent");
  score->add_option("--out", sc_out, "Also write the ranking as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (generate->parsed()) {
      gen.out = gen_out;
      if (count_opt->count()) gen.count = gen_count;
      if (seed_opt->count()) gen.seed = gen_seed;
      const GenConfig cfg = load_config(config_path);
      const Manifest m = cmd_generate(cfg, gen);
      out << "generated " << m.accepted() << " samples (" << m.rejected() << " rejected attempts) in "
          << gen.out.string() << "\n";
    } else if (demux_cmd->parsed()) {
      dmx.in = dmx_in;
      dmx.out = dmx_out;
      dmx.mode = parse_demux_mode(dmx_mode);
      dmx.mask = parse_mask_source(dmx_mask);
      if (dmx_order == "linear") dmx.params.order = NcOrder::linear;
      else if (dmx_order == "constant") dmx.params.order = NcOrder::constant;
      else throw ConfigError("--order must be linear or constant");
      const json run = cmd_demux(dmx);
      out << "reconstructed " << run["samples"].size() << " samples (" << dmx_mode << ", " << dmx_mask
          << " mask) in " << dmx.out.string() << "\n";
    } else if (evaluate->parsed()) {
      ev.pred = ev_pred;
      ev.truth = ev_truth;
      if (!ev_lpips.empty()) ev.lpips_file = ev_lpips;
      emit_json(cmd_evaluate(ev), ev_out, out);
    } else if (score->parsed()) {
      for (const auto& f : sc_files) sc.metrics.emplace_back(f);
      if (!sc_weights.empty()) sc.weights = parse_weights(sc_weights);
      const auto ranked = cmd_score(sc);
      out << format_ranking(ranked);
      if (!sc_out.empty()) write_text_atomic(sc_out, ranking_json(ranked, sc.weights).dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    err << "muxgel: error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}

}  // namespace muxgel
