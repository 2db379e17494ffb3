// Copyright 2026 The edgetrack Authors.
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

// Command-line front end: synth, train, eval, sweep, calibrate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgetrack/edgetrack.hpp"
#include "edgetrack/harness/config.hpp"
#include "edgetrack/harness/experiments.hpp"
#include "edgetrack/harness/report.hpp"

namespace fs = std::filesystem;
using namespace edgetrack;
using namespace edgetrack::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file (defaults apply to missing keys)");
  app->add_option("--seed", c.seed, "run seed (overrides the config seed)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--override", c.overrides, "dotted key=value config override")->take_all();
}

struct Run {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  std::string hash;
  fs::path out;
};

Run prepare(const Common& c) {
  Run r;
  r.cfg = resolve_config(c.config, c.overrides);
  if (c.seed) r.cfg.seed = *c.seed;
  r.seed = r.cfg.seed;
  r.hash = config_hash(r.cfg);
  r.out = c.out;
  fs::create_directories(r.out);
  return r;
}

std::vector<std::string> metric_header() {
  return {"mar", "utilization", "ku_usage", "ku_fraction", "model_index", "power_mw", "energy_power_mw",
          "reward", "raw_mar", "raw_ku", "raw_period", "segments", "frames"};
}

std::vector<std::string> metric_cells(const EpisodeMetrics& m, double fps) {
  const double seconds = m.frames / fps;
  const double energy_power = seconds > 0.0 ? m.energy_mj / seconds : 0.0;
  return {cell(m.mar()),         cell(m.utilization()), cell(m.ku_usage()),   cell(m.ku_fraction()),
          cell(m.model_index()), cell(m.power_mw()),    cell(energy_power),   cell(m.mean_reward()),
          cell(m.mean_raw(0)),   cell(m.mean_raw(1)),   cell(m.mean_raw(2)),  cell(m.segments),
          cell(m.frames)};
}

template <typename T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

nlohmann::json split_json(const Split& s, const std::vector<Video>& suite) {
  nlohmann::json train = nlohmann::json::array(), eval = nlohmann::json::array();
  for (int v : s.train) train.push_back(suite[static_cast<std::size_t>(v)].name);
  for (int v : s.eval) eval.push_back(suite[static_cast<std::size_t>(v)].name);
  return {{"train", train}, {"eval", eval}};
}

int cmd_synth(const Common& c) {
  const Run r = prepare(c);
  const auto suite = build_suite(r.cfg);
  fs::create_directories(r.out / "traces");
  CsvWriter index(r.out / "synth_index.csv",
                  {"seed", "config_hash", "video", "file", "motion_class", "speed", "motion_stat", "frames"});
  for (const auto& v : suite) {
    const std::string file = "traces/" + v.name + ".trace";
    save_trace((r.out / file).string(), *v.trace);
    const auto stat = motion_stat(*v.trace, 0, v.trace->frame_count() - 1);
    index.row({cell(r.seed), r.hash, v.name, file, std::string(to_string(v.motion_class)), cell(v.speed),
               cell(stat.value), cell(v.trace->frame_count())});
  }
  write_json(r.out / "manifest.json", manifest(r.cfg, "synth", r.seed));
  std::printf("wrote %zu traces to %s\n", suite.size(), (r.out / "traces").string().c_str());
  return 0;
}

int cmd_train(const Common& c, int checkpoint_every) {
  const Run r = prepare(c);
  const auto suite = build_suite(r.cfg);
  const auto split = split_videos(static_cast<int>(suite.size()), r.cfg.train_fraction, r.cfg.seed);
  CsvWriter log(r.out / "train_log.csv",
                concat<std::string>({"seed", "config_hash", "episode", "video", "quality", "epsilon", "decisions",
                                     "loss"},
                                    metric_header()));
  const double fps = r.cfg.suite.fps;
  const auto result = train(r.cfg, suite, split, r.seed, [&](const TrainLogRow& row, const drl::Mlp& net) {
    log.row(concat<std::string>({cell(r.seed), r.hash, cell(row.episode), row.video, cell(row.quality),
                                 cell(row.epsilon), cell(row.decisions), cell(row.loss)},
                                metric_cells(row.metrics, fps)));
    if (checkpoint_every > 0 && (row.episode + 1) % checkpoint_every == 0) {
      const std::string name = "checkpoint_ep" + std::to_string(row.episode + 1) + ".qnet";
      drl::save_checkpoint((r.out / name).string(), net);
      std::fprintf(stderr, "episode %d: mar %.3f reward %.3f\n", row.episode + 1, row.metrics.mar(),
                   row.metrics.mean_reward());
    }
  });
  const fs::path ckpt = r.out / "checkpoint.qnet";
  drl::save_checkpoint(ckpt.string(), result.network);
  save_normalizer(ckpt.string() + ".norm", result.normalizer);
  write_json(r.out / "manifest.json", manifest(r.cfg, "train", r.seed, {{"split", split_json(split, suite)}}));
  std::printf("checkpoint %s\n", ckpt.string().c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& checkpoints, const std::vector<std::string>& fixed,
             bool all_videos, bool segment_log) {
  const Run r = prepare(c);
  const auto suite = build_suite(r.cfg);
  const auto split = split_videos(static_cast<int>(suite.size()), r.cfg.train_fraction, r.cfg.seed);
  std::vector<int> videos = split.eval;
  if (all_videos) {
    videos.clear();
    for (int v = 0; v < static_cast<int>(suite.size()); ++v) videos.push_back(v);
  }

  std::vector<PolicySpec> policies;
  std::vector<drl::Mlp> nets;
  nets.reserve(checkpoints.size());
  RewardNormalizer norm = make_normalizer(r.cfg);
  const auto layout = drl::Mlp::q_layout(state_size(r.cfg), r.cfg.trainer.hidden_layers, r.cfg.trainer.hidden_width,
                                         kActionCount);
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    nets.push_back(drl::load_checkpoint(checkpoints[i], layout));
    norm = load_normalizer(checkpoints[i] + ".norm");
    policies.push_back(learned_policy(checkpoints.size() == 1 ? "learned" : "learned" + std::to_string(i),
                                      checkpoints[i]));
  }
  policies.push_back(policy_1());
  policies.push_back(policy_2());
  for (const auto& f : fixed) {
    int k = 0, p = 0, m = 0;
    if (std::sscanf(f.c_str(), "%d,%d,%d", &k, &p, &m) != 3) throw Error(ErrorKind::kConfig, "--fixed wants k,p,m");
    const Action a{k != 0, p, m};
    if (!a.valid()) throw Error(ErrorKind::kInvalidAction, "--fixed " + f);
    policies.push_back(fixed_policy("fixed_" + std::to_string(k) + "_" + std::to_string(p) + "_" + std::to_string(m), a));
  }
  std::vector<drl::Mlp*> ptrs(policies.size(), nullptr);
  for (std::size_t i = 0; i < nets.size(); ++i) ptrs[i] = &nets[i];

  const auto rows = evaluate(r.cfg, suite, videos, policies, ptrs, norm, r.seed, segment_log);
  if (segment_log) {
    CsvWriter seg(r.out / "segments.csv",
                  {"seed", "config_hash", "policy", "video", "episode_seed", "decision_index", "frame_index", "k",
                   "period", "model", "delta_od_s", "mar", "ku_fraction", "reward", "motion_class",
                   "channel_quality"});
    for (const auto& row : rows) {
      for (const auto& s : row.segments) {
        const auto& o = s.outcome;
        seg.row({cell(r.seed), r.hash, row.policy, row.video, cell(row.seed), cell(o.decision_index),
                 cell(o.frame_index), cell(o.action.katchup), cell(o.action.period_frames()),
                 cell(o.action.model_idx), cell(o.delta_od_s), cell(o.mar), cell(o.ku_fraction), cell(s.reward),
                 std::string(to_string(o.motion_class)), cell(o.channel_quality)});
      }
    }
  }
  const double fps = r.cfg.suite.fps;
  CsvWriter out(r.out / "eval.csv",
                concat<std::string>({"seed", "config_hash", "policy", "video", "quality", "episode_seed"},
                                    metric_header()));
  for (const auto& row : rows) {
    out.row(concat<std::string>({cell(r.seed), r.hash, row.policy, row.video, cell(row.quality), cell(row.seed)},
                                metric_cells(row.metrics, fps)));
  }
  CsvWriter summary(r.out / "eval_summary.csv",
                    concat<std::string>({"seed", "config_hash", "policy", "scope"}, metric_header()));
  for (const auto& p : policies) {
    EpisodeMetrics all;
    std::vector<std::pair<double, EpisodeMetrics>> by_quality;
    for (double q : r.cfg.channel_qualities) by_quality.push_back({q, {}});
    for (const auto& row : rows) {
      if (row.policy != p.name) continue;
      all.merge(row.metrics);
      for (auto& [q, m] : by_quality) {
        if (q == row.quality) m.merge(row.metrics);
      }
    }
    summary.row(concat<std::string>({cell(r.seed), r.hash, p.name, "all"}, metric_cells(all, fps)));
    for (const auto& [q, m] : by_quality) {
      summary.row(concat<std::string>({cell(r.seed), r.hash, p.name, "quality_" + format_real(q)}, metric_cells(m, fps)));
    }
    std::printf("%-14s mar %.4f  util %.3f  ku %.3f  model %.3f  power %.1f mW\n", p.name.c_str(), all.mar(),
                all.utilization(), all.ku_usage(), all.model_index(), all.power_mw());
  }
  write_json(r.out / "manifest.json", manifest(r.cfg, "eval", r.seed,
                                               {{"split", split_json(split, suite)}, {"checkpoints", checkpoints}}));
  return 0;
}

int cmd_sweep(const Common& c, const std::string& axis_name, const std::string& ku_name) {
  const Run r = prepare(c);
  const auto axis = parse_axis(axis_name);
  const auto cells = run_sweep(r.cfg, axis, parse_ku(ku_name), r.seed);
  CsvWriter out(r.out / ("sweep_" + axis_name + ".csv"),
                {"seed", "config_hash", "axis", "axis_value", "ku", "model", "period_s", "latency_s", "speed",
                 "quality", "runs", "mean_mar", "min_mar", "max_mar", "mean_ku_fraction"});
  for (const auto& c2 : cells) {
    const auto& m = c2.result.mar;
    out.row({cell(r.seed), r.hash, c2.axis, cell(c2.axis_value), cell(c2.katchup), cell(c2.model), cell(c2.period_s),
             c2.latency_s < 0.0 ? std::string("channel") : cell(c2.latency_s), cell(c2.speed), cell(c2.quality),
             cell(static_cast<int>(m.size())), cell(c2.result.mean_mar), cell(*std::min_element(m.begin(), m.end())),
             cell(*std::max_element(m.begin(), m.end())), cell(c2.result.mean_ku_fraction)});
  }
  write_json(r.out / "manifest.json",
             manifest(r.cfg, "sweep", r.seed, {{"axis", axis_name}, {"ku", ku_name}}));
  std::printf("%zu cells -> %s\n", cells.size(), (r.out / ("sweep_" + axis_name + ".csv")).string().c_str());
  return 0;
}

int cmd_calibrate(const Common& c) {
  const Run r = prepare(c);
  const auto result = calibrate(r.cfg, r.seed);
  CsvWriter out(r.out / "calibration.csv",
                {"seed", "config_hash", "anchor", "target_mar", "simulated_mar", "residual"});
  for (std::size_t i = 0; i < result.residuals.size(); ++i) {
    const auto& a = r.cfg.calibration.anchors[i];
    out.row({cell(r.seed), r.hash, a.name, cell(a.target_mar), cell(a.target_mar + result.residuals[i]),
             cell(result.residuals[i])});
  }
  write_json(r.out / "calibrated_config.json", to_json(result.config));
  write_json(r.out / "manifest.json",
             manifest(r.cfg, "calibrate", r.seed,
                      {{"iterations", result.iterations},
                       {"evaluations", result.evaluations},
                       {"converged", result.converged},
                       {"calibrated_config_hash", config_hash(result.config)}}));
  std::printf("calibration: %d moves, %d evaluations, loss %s\n", result.iterations, result.evaluations,
              format_real(result.loss).c_str());
  if (!result.converged) {
    const Error e(ErrorKind::kCalibrationDiverged, "some anchor residuals exceed " +
                                                        format_real(r.cfg.calibration.residual_threshold));
    std::fprintf(stderr, "%s\n", e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge-offloaded detection and tracking simulator"};
  app.require_subcommand(1);

  Common synth_c, train_c, eval_c, sweep_c, calib_c;
  auto* synth = app.add_subcommand("synth", "write the synthetic trace suite");
  add_common(synth, synth_c);

  auto* train_cmd = app.add_subcommand("train", "train the controller");
  add_common(train_cmd, train_c);
  int checkpoint_every = 50;
  train_cmd->add_option("--checkpoint-every", checkpoint_every, "episodes between periodic checkpoints (0: none)");

  auto* eval = app.add_subcommand("eval", "compare policies on held-out videos");
  add_common(eval, eval_c);
  std::vector<std::string> checkpoints, fixed;
  bool all_videos = false, segment_log = false;
  eval->add_option("--checkpoint", checkpoints, "learned policy checkpoint (repeatable)");
  eval->add_option("--fixed", fixed, "extra fixed policy k,p_idx,m_idx (repeatable)");
  eval->add_flag("--all-videos", all_videos, "evaluate on every video instead of the held-out split");
  eval->add_flag("--segment-log", segment_log, "also write one row per segment to segments.csv");

  auto* sweep = app.add_subcommand("sweep", "trend sweeps over one axis");
  add_common(sweep, sweep_c);
  std::string axis = "latency", ku = "both";
  sweep->add_option("--axis", axis, "latency|motion|channel|model|period")
      ->check(CLI::IsMember({"latency", "motion", "channel", "model", "period"}));
  sweep->add_option("--ku", ku, "on|off|both")->check(CLI::IsMember({"on", "off", "both"}));

  auto* calib = app.add_subcommand("calibrate", "fit tracker and detector parameters to the anchors");
  add_common(calib, calib_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_c);
    if (train_cmd->parsed()) return cmd_train(train_c, checkpoint_every);
    if (eval->parsed()) return cmd_eval(eval_c, checkpoints, fixed, all_videos, segment_log);
    if (sweep->parsed()) return cmd_sweep(sweep_c, axis, ku);
    if (calib->parsed()) return cmd_calibrate(calib_c);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
