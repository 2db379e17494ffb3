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

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgetrack/drl/dqn.hpp"
#include "edgetrack/edge.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/format.hpp"
#include "edgetrack/sim.hpp"
#include "edgetrack/trace.hpp"
#include "edgetrack/tracker.hpp"

namespace edgetrack::harness {

using nlohmann::json;

struct SpeedRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Synthetic video suite: videos cycle through the slow/fast/fastest classes
// and through the listed motion patterns.
struct SuiteConfig {
  int videos = 30;
  int frames = 600;
  double fps = 10.0;
  int width = 1280;
  int height = 720;
  int objects = 3;
  double box_frac_min = 0.08;
  double box_frac_max = 0.16;
  std::vector<SpeedRange> class_speeds{{0.01, 0.04}, {0.07, 0.15}, {0.25, 0.4}};
  std::vector<std::string> patterns{"linear_bounce", "circular"};
};

// One trend target used by calibration: the mean mAR of a fixed policy on
// synthetic traces moving at `speed`.
struct CalibrationAnchor {
  std::string name;
  double speed = 0.1;
  double latency_s = 0.5;
  bool katchup = false;
  double period_s = 0.5;
  int model = 2;
  bool ground_truth = true;
  double target_mar = 0.0;
};

struct SweepConfig {
  std::vector<double> latencies{0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  std::vector<double> periods_s{0.5, 1.0, 1.5};
  std::vector<int> models{0, 1, 2};
  std::vector<double> motion_speeds{0.02, 0.1, 0.3};
  std::vector<double> qualities{20.0, 28.0, 36.0, 44.0};
  int seeds = 20;
  bool ground_truth = true;  // detector quality for the latency/motion/period axes
  double speed = 0.1;        // motion used by the non-motion axes
  double latency_s = 0.5;    // latency used by the non-latency axes
  std::string pattern = "linear_bounce";
};

struct CalibrationConfig {
  std::vector<CalibrationAnchor> anchors{
      {"latency_0.25_ku_off", 0.1, 0.25, false, 0.5, 2, true, 0.85},
      {"latency_1.5_ku_off", 0.1, 1.5, false, 0.5, 2, true, 0.65},
      {"latency_1.5_ku_on", 0.1, 1.5, true, 0.5, 2, true, 0.8},
      {"motion_slow", 0.02, 0.5, false, 1.5, 1, false, 0.92},
      {"motion_fast", 0.1, 0.5, false, 1.5, 1, false, 0.6},
      {"motion_fastest", 0.3, 0.5, false, 1.5, 1, false, 0.5},
  };
  int max_rounds = 6;
  int seeds = 8;
  double residual_threshold = 0.08;
  double initial_step = 0.25;  // relative step of the coordinate search
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  SuiteConfig suite;
  std::vector<std::string> trace_files;
  double train_fraction = 0.8;

  TrackerParams tracker;
  DetectorTable detectors = server_detector_table();
  ChannelModel channel;
  std::vector<double> channel_qualities{20.0, 28.0, 36.0, 44.0};
  double server_load_factor = 1.0;

  RewardVector alphas = kDefaultAlphas;
  bool standardize_reward = true;
  double reward_clip = 3.0;

  int history_rows = 8;
  StateNormalization norm;

  drl::TrainerConfig trainer;
  int eval_seeds = 5;

  SweepConfig sweep;
  CalibrationConfig calibration;
};

// ---------------------------------------------------------------------------
// JSON mapping

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  json speeds = json::array();
  for (const auto& r : c.suite.class_speeds) speeds.push_back({r.lo, r.hi});
  j["suite"] = {{"videos", c.suite.videos},       {"frames", c.suite.frames},
                {"fps", c.suite.fps},             {"width", c.suite.width},
                {"height", c.suite.height},       {"objects", c.suite.objects},
                {"box_frac_min", c.suite.box_frac_min}, {"box_frac_max", c.suite.box_frac_max},
                {"class_speeds", speeds},         {"patterns", c.suite.patterns}};
  j["trace_files"] = c.trace_files;
  j["train_fraction"] = c.train_fraction;
  j["tracker"] = {{"eta", c.tracker.eta},
                  {"loss_c0", c.tracker.loss_c0},
                  {"loss_c1", c.tracker.loss_c1},
                  {"iou_lost_threshold", c.tracker.iou_lost_threshold},
                  {"ku_speed", c.tracker.ku_speed}};
  json det = json::array();
  for (const auto& d : c.detectors) {
    det.push_back({{"name", d.name},
                   {"compute_time_s", d.compute_time_s},
                   {"image_size_bytes", d.image_size_bytes},
                   {"miss_prob", d.miss_prob},
                   {"box_jitter", d.box_jitter}});
  }
  j["detectors"] = det;
  j["channel"] = {{"base_rate_bps", c.channel.base_rate_bps},
                  {"rate_jitter", c.channel.rate_jitter},
                  {"overhead_s", c.channel.overhead_s},
                  {"evolution", c.channel.evolution}};
  j["channel_qualities"] = c.channel_qualities;
  j["server_load_factor"] = c.server_load_factor;
  j["reward"] = {{"alphas", c.alphas}, {"standardize", c.standardize_reward}, {"clip", c.reward_clip}};
  j["state"] = {{"history_rows", c.history_rows},
                {"image_size_max", c.norm.image_size_max},
                {"latency_cap", c.norm.latency_cap},
                {"motion_cap", c.norm.motion_cap}};
  const auto& t = c.trainer;
  j["trainer"] = {{"gamma", t.gamma},
                  {"learning_rate", t.learning_rate},
                  {"batch_size", t.batch_size},
                  {"target_sync_every", t.target_sync_every},
                  {"epsilon_start", t.epsilon_start},
                  {"epsilon_end", t.epsilon_end},
                  {"epsilon_decay_steps", t.epsilon_decay_steps},
                  {"buffer_capacity", t.buffer_capacity},
                  {"episodes", t.episodes},
                  {"hidden_layers", t.hidden_layers},
                  {"hidden_width", t.hidden_width},
                  {"clip_td_error", t.clip_td_error},
                  {"warmup", t.warmup},
                  {"train_every", t.train_every}};
  j["eval_seeds"] = c.eval_seeds;
  const auto& s = c.sweep;
  j["sweep"] = {{"latencies", s.latencies},   {"periods_s", s.periods_s},
                {"models", s.models},         {"motion_speeds", s.motion_speeds},
                {"qualities", s.qualities},   {"seeds", s.seeds},
                {"ground_truth", s.ground_truth}, {"speed", s.speed},
                {"latency_s", s.latency_s},   {"pattern", s.pattern}};
  json anchors = json::array();
  for (const auto& a : c.calibration.anchors) {
    anchors.push_back({{"name", a.name},
                       {"speed", a.speed},
                       {"latency_s", a.latency_s},
                       {"katchup", a.katchup},
                       {"period_s", a.period_s},
                       {"model", a.model},
                       {"ground_truth", a.ground_truth},
                       {"target_mar", a.target_mar}});
  }
  j["calibration"] = {{"anchors", anchors},
                      {"max_rounds", c.calibration.max_rounds},
                      {"seeds", c.calibration.seeds},
                      {"residual_threshold", c.calibration.residual_threshold},
                      {"initial_step", c.calibration.initial_step}};
  return j;
}

namespace detail {

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("field '") + key + "': " + e.what());
  }
}

// Every key of `given` must exist in `reference` (arrays are replaced
// wholesale and not descended into).
inline void check_known_keys(const json& reference, const json& given, const std::string& path) {
  if (!given.is_object()) return;
  if (!reference.is_object()) throw Error(ErrorKind::kConfig, "'" + path + "' is not an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string sub = path.empty() ? it.key() : path + "." + it.key();
    if (!reference.contains(it.key())) throw Error(ErrorKind::kConfig, "unknown config key '" + sub + "'");
    if (it.value().is_object()) check_known_keys(reference.at(it.key()), it.value(), sub);
  }
}

}  // namespace detail

inline ExperimentConfig from_json(const json& j) {
  using detail::get;
  ExperimentConfig c;
  c.seed = get<std::uint64_t>(j, "seed");
  const auto& su = j.at("suite");
  c.suite.videos = get<int>(su, "videos");
  c.suite.frames = get<int>(su, "frames");
  c.suite.fps = get<double>(su, "fps");
  c.suite.width = get<int>(su, "width");
  c.suite.height = get<int>(su, "height");
  c.suite.objects = get<int>(su, "objects");
  c.suite.box_frac_min = get<double>(su, "box_frac_min");
  c.suite.box_frac_max = get<double>(su, "box_frac_max");
  c.suite.class_speeds.clear();
  for (const auto& r : su.at("class_speeds")) {
    if (!r.is_array() || r.size() != 2) throw Error(ErrorKind::kConfig, "class_speeds entries are [lo, hi]");
    c.suite.class_speeds.push_back({r[0].get<double>(), r[1].get<double>()});
  }
  c.suite.patterns = get<std::vector<std::string>>(su, "patterns");
  c.trace_files = get<std::vector<std::string>>(j, "trace_files");
  c.train_fraction = get<double>(j, "train_fraction");

  const auto& tr = j.at("tracker");
  c.tracker.eta = get<double>(tr, "eta");
  c.tracker.loss_c0 = get<double>(tr, "loss_c0");
  c.tracker.loss_c1 = get<double>(tr, "loss_c1");
  c.tracker.iou_lost_threshold = get<double>(tr, "iou_lost_threshold");
  c.tracker.ku_speed = get<double>(tr, "ku_speed");

  c.detectors.clear();
  int id = 0;
  for (const auto& d : j.at("detectors")) {
    DetectorModelSpec s;
    s.model_id = id++;
    s.name = get<std::string>(d, "name");
    s.compute_time_s = get<double>(d, "compute_time_s");
    s.image_size_bytes = get<long>(d, "image_size_bytes");
    s.miss_prob = get<double>(d, "miss_prob");
    s.box_jitter = get<double>(d, "box_jitter");
    c.detectors.push_back(s);
  }
  const auto& ch = j.at("channel");
  c.channel.base_rate_bps = get<double>(ch, "base_rate_bps");
  c.channel.rate_jitter = get<double>(ch, "rate_jitter");
  c.channel.overhead_s = get<double>(ch, "overhead_s");
  c.channel.evolution = get<double>(ch, "evolution");
  c.channel_qualities = get<std::vector<double>>(j, "channel_qualities");
  c.server_load_factor = get<double>(j, "server_load_factor");

  const auto& rw = j.at("reward");
  const auto alphas = get<std::vector<double>>(rw, "alphas");
  if (alphas.size() != 3) throw Error(ErrorKind::kConfig, "reward.alphas needs three weights");
  c.alphas = {alphas[0], alphas[1], alphas[2]};
  c.standardize_reward = get<bool>(rw, "standardize");
  c.reward_clip = get<double>(rw, "clip");

  const auto& st = j.at("state");
  c.history_rows = get<int>(st, "history_rows");
  c.norm.image_size_max = get<double>(st, "image_size_max");
  c.norm.latency_cap = get<double>(st, "latency_cap");
  c.norm.motion_cap = get<double>(st, "motion_cap");

  const auto& t = j.at("trainer");
  c.trainer.gamma = get<double>(t, "gamma");
  c.trainer.learning_rate = get<double>(t, "learning_rate");
  c.trainer.batch_size = get<int>(t, "batch_size");
  c.trainer.target_sync_every = get<int>(t, "target_sync_every");
  c.trainer.epsilon_start = get<double>(t, "epsilon_start");
  c.trainer.epsilon_end = get<double>(t, "epsilon_end");
  c.trainer.epsilon_decay_steps = get<long>(t, "epsilon_decay_steps");
  c.trainer.buffer_capacity = get<std::size_t>(t, "buffer_capacity");
  c.trainer.episodes = get<int>(t, "episodes");
  c.trainer.hidden_layers = get<int>(t, "hidden_layers");
  c.trainer.hidden_width = get<int>(t, "hidden_width");
  c.trainer.clip_td_error = get<bool>(t, "clip_td_error");
  c.trainer.warmup = get<int>(t, "warmup");
  c.trainer.train_every = get<int>(t, "train_every");
  c.eval_seeds = get<int>(j, "eval_seeds");

  const auto& sw = j.at("sweep");
  c.sweep.latencies = get<std::vector<double>>(sw, "latencies");
  c.sweep.periods_s = get<std::vector<double>>(sw, "periods_s");
  c.sweep.models = get<std::vector<int>>(sw, "models");
  c.sweep.motion_speeds = get<std::vector<double>>(sw, "motion_speeds");
  c.sweep.qualities = get<std::vector<double>>(sw, "qualities");
  c.sweep.seeds = get<int>(sw, "seeds");
  c.sweep.ground_truth = get<bool>(sw, "ground_truth");
  c.sweep.speed = get<double>(sw, "speed");
  c.sweep.latency_s = get<double>(sw, "latency_s");
  c.sweep.pattern = get<std::string>(sw, "pattern");

  const auto& ca = j.at("calibration");
  c.calibration.anchors.clear();
  for (const auto& a : ca.at("anchors")) {
    CalibrationAnchor an;
    an.name = get<std::string>(a, "name");
    an.speed = get<double>(a, "speed");
    an.latency_s = get<double>(a, "latency_s");
    an.katchup = get<bool>(a, "katchup");
    an.period_s = get<double>(a, "period_s");
    an.model = get<int>(a, "model");
    an.ground_truth = get<bool>(a, "ground_truth");
    an.target_mar = get<double>(a, "target_mar");
    c.calibration.anchors.push_back(an);
  }
  c.calibration.max_rounds = get<int>(ca, "max_rounds");
  c.calibration.seeds = get<int>(ca, "seeds");
  c.calibration.residual_threshold = get<double>(ca, "residual_threshold");
  c.calibration.initial_step = get<double>(ca, "initial_step");
  return c;
}

// Parses "a.b.c=value"; numeric path segments index arrays. The value is read as JSON when it parses as JSON
// and as a plain string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::kConfig, "override '" + assignment + "' is not key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_array()) {
      std::size_t idx = 0;
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
      if (ec != std::errc() || ptr != key.data() + key.size() || idx >= node->size()) {
        throw Error(ErrorKind::kConfig, "bad index '" + key + "' in '" + path + "'");
      }
      node = &(*node)[idx];
    } else if (node->is_object() && node->contains(key)) {
      node = &(*node)[key];
    } else {
      throw Error(ErrorKind::kConfig, "unknown config key '" + path + "'");
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

inline void validate(const ExperimentConfig& c) {
  validate_alphas(c.alphas);
  c.tracker.validate();
  validate_detector_table(c.detectors);
  if (static_cast<int>(c.detectors.size()) != kModelChoices) {
    throw Error(ErrorKind::kConfig, "exactly three detectors are required");
  }
  ChannelModel ch = c.channel;
  for (double q : c.channel_qualities) {
    ch.quality_index = q;
    ch.validate();
  }
  c.trainer.validate();
  if (c.channel_qualities.empty()) throw Error(ErrorKind::kConfig, "channel_qualities is empty");
  if (c.suite.videos <= 0 || c.suite.class_speeds.empty() || c.suite.patterns.empty()) {
    throw Error(ErrorKind::kConfig, "suite needs videos, speed classes and patterns");
  }
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, "train_fraction must lie in (0, 1)");
  }
  if (c.history_rows <= 0 || c.eval_seeds <= 0 || c.sweep.seeds <= 0) {
    throw Error(ErrorKind::kConfig, "counts must be positive");
  }
}

// Defaults, patched by the optional config file, then by --override
// assignments in order.
inline ExperimentConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  const json defaults = to_json(ExperimentConfig{});
  json merged = defaults;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kConfig, "cannot open config '" + path + "'");
    json user = json::parse(in, nullptr, false, true);
    if (user.is_discarded() || !user.is_object()) throw Error(ErrorKind::kConfig, "config is not a JSON object");
    detail::check_known_keys(defaults, user, "");
    merged.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(merged, o);
  ExperimentConfig c = from_json(merged);
  validate(c);
  return c;
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

}  // namespace edgetrack::harness
