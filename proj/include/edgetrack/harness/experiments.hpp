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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <fstream>
#include <vector>

#include "edgetrack/drl/dqn.hpp"
#include "edgetrack/drl/mlp.hpp"
#include "edgetrack/edge.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/harness/config.hpp"
#include "edgetrack/rng.hpp"
#include "edgetrack/sim.hpp"
#include "edgetrack/trace.hpp"

namespace edgetrack::harness {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b + 0x632be59bd9b4e019ULL));
}

inline MotionPattern parse_pattern(const std::string& name) {
  if (name == "linear_bounce") return MotionPattern::kLinearBounce;
  if (name == "circular") return MotionPattern::kCircular;
  throw Error(ErrorKind::kConfig, "unknown motion pattern '" + name + "'");
}

inline int period_index_for(double period_s, double fps) {
  const int frames = static_cast<int>(std::lround(period_s * fps));
  for (int i = 0; i < static_cast<int>(kPeriodFrames.size()); ++i) {
    if (kPeriodFrames[static_cast<std::size_t>(i)] == frames) return i;
  }
  throw Error(ErrorKind::kConfig, "period " + format_real(period_s) + " s is not an available period");
}

// ---------------------------------------------------------------------------
// Video suite

struct Video {
  std::string name;
  std::shared_ptr<const GroundTruthTrace> trace;
  double speed = 0.0;  // nominal, synthetic videos only
  MotionClass motion_class = MotionClass::kSlow;
};

inline SynthConfig synth_config(const SuiteConfig& s, double speed, MotionPattern pattern) {
  SynthConfig c;
  c.frame_count = s.frames;
  c.fps = s.fps;
  c.width = s.width;
  c.height = s.height;
  c.object_count = s.objects;
  c.speed = speed;
  c.box_frac_min = s.box_frac_min;
  c.box_frac_max = s.box_frac_max;
  c.pattern = pattern;
  return c;
}

// Trace files when listed, the synthetic suite otherwise. Video v of the
// synthetic suite belongs to speed class v mod (number of classes).
inline std::vector<Video> build_suite(const ExperimentConfig& cfg) {
  std::vector<Video> out;
  if (!cfg.trace_files.empty()) {
    for (const auto& path : cfg.trace_files) {
      auto trace = std::make_shared<const GroundTruthTrace>(load_trace(path));
      const auto stat = motion_stat(*trace, 0, trace->frame_count() - 1);
      out.push_back({path, trace, stat.value, classify_motion(stat.value)});
    }
    return out;
  }
  const auto& s = cfg.suite;
  const int classes = static_cast<int>(s.class_speeds.size());
  for (int v = 0; v < s.videos; ++v) {
    const int cls = v % classes;
    const auto range = s.class_speeds[static_cast<std::size_t>(cls)];
    const auto pattern = parse_pattern(s.patterns[static_cast<std::size_t>((v / classes) % s.patterns.size())]);
    Rng rng = Rng::stream(cfg.seed, 1000 + static_cast<std::uint64_t>(v));
    const double speed = rng.uniform(range.lo, range.hi);
    auto trace = std::make_shared<const GroundTruthTrace>(
        synth_trace(synth_config(s, speed, pattern), derive_seed(cfg.seed, 2000, static_cast<std::uint64_t>(v))));
    out.push_back({"synth_" + std::to_string(v), trace, speed, classify_motion(speed)});
  }
  return out;
}

struct Split {
  std::vector<int> train;
  std::vector<int> eval;
};

// Seeded shuffle, then the first round(fraction * n) videos train. Both
// sides keep at least one video when n >= 2.
inline Split split_videos(int count, double train_fraction, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng = Rng::stream(seed, 77);
  for (int i = count - 1; i > 0; --i) {
    const auto j = rng.uniform_index(static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }
  int n_train = static_cast<int>(std::lround(train_fraction * count));
  if (count >= 2) n_train = std::clamp(n_train, 1, count - 1);
  Split s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.eval.assign(order.begin() + n_train, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.eval.begin(), s.eval.end());
  return s;
}

inline EnvConfig make_env_config(const ExperimentConfig& cfg, double quality) {
  EnvConfig e;
  e.tracker = cfg.tracker;
  e.detectors = cfg.detectors;
  e.channel = cfg.channel;
  e.channel.quality_index = quality;
  e.server_load_factor = cfg.server_load_factor;
  e.history_rows = cfg.history_rows;
  e.norm = cfg.norm;
  return e;
}

inline int state_size(const ExperimentConfig& cfg) { return cfg.history_rows * kFeaturesPerRow; }

// ---------------------------------------------------------------------------
// Policies

struct PolicySpec {
  enum class Kind { kLearned, kFixed };
  Kind kind = Kind::kFixed;
  std::string name;
  std::string checkpoint;  // learned policies
  Action action;           // fixed policies
};

// Re-tracking on every result, shortest period, largest detector.
inline PolicySpec policy_1() { return {PolicySpec::Kind::kFixed, "policy1", "", Action{true, 0, 2}}; }

// No re-tracking, longest period, largest detector.
inline PolicySpec policy_2() { return {PolicySpec::Kind::kFixed, "policy2", "", Action{false, 2, 2}}; }

inline PolicySpec fixed_policy(std::string name, Action a) {
  return {PolicySpec::Kind::kFixed, std::move(name), "", a};
}

inline PolicySpec learned_policy(std::string name, std::string checkpoint) {
  return {PolicySpec::Kind::kLearned, std::move(name), std::move(checkpoint), Action{}};
}

using Controller = std::function<Action(const StateVector&)>;

inline Controller greedy_controller(const drl::Mlp& net) {
  return [&net](const StateVector& s) { return Action::from_index(drl::argmax(net.forward(s.values))); };
}

inline Controller fixed_controller(Action a) {
  return [a](const StateVector&) { return a; };
}

// ---------------------------------------------------------------------------
// Episode metrics

struct ClassUsage {
  long frames = 0;
  double ku_frames = 0.0;    // frames under segments with re-tracking on
  double util_frames = 0.0;  // frames weighted by the utilization index
};

struct EpisodeMetrics {
  int segments = 0;
  long frames = 0;
  long scored_frames = 0;
  double recall_sum = 0.0;
  double ku_on_frames = 0.0;
  long ku_active_frames = 0;
  double util_frames = 0.0;
  double model_frames = 0.0;
  double energy_mj = 0.0;
  double reward_sum = 0.0;
  RewardVector raw_sum{};
  std::array<ClassUsage, 3> by_class{};

  double mar() const { return scored_frames > 0 ? recall_sum / scored_frames : 1.0; }
  double ku_usage() const { return frames > 0 ? ku_on_frames / frames : 0.0; }
  double ku_fraction() const { return frames > 0 ? static_cast<double>(ku_active_frames) / frames : 0.0; }
  double utilization() const { return frames > 0 ? util_frames / frames : 0.0; }
  double model_index() const { return frames > 0 ? model_frames / frames : 0.0; }
  double power_mw() const { return mean_power_mw(ku_fraction()); }
  double mean_reward() const { return segments > 0 ? reward_sum / segments : 0.0; }
  double mean_raw(std::size_t k) const { return segments > 0 ? raw_sum[k] / segments : 0.0; }

  void add(const SegmentOutcome& o, double r) {
    ++segments;
    frames += o.frames;
    scored_frames += o.scored_frames;
    recall_sum += o.recall_sum;
    const double k = o.action.katchup ? 1.0 : 0.0;
    const double u = utilization_index(o.action.period_frames());
    ku_on_frames += k * o.frames;
    ku_active_frames += o.ku_frames;
    util_frames += u * o.frames;
    model_frames += model_index_norm(o.action.model_idx) * o.frames;
    energy_mj += o.energy_mj;
    reward_sum += r;
    const auto raw = reward_components(o);
    for (std::size_t c = 0; c < 3; ++c) raw_sum[c] += raw[c];
    auto& cu = by_class[static_cast<std::size_t>(o.motion_class)];
    cu.frames += o.frames;
    cu.ku_frames += k * o.frames;
    cu.util_frames += u * o.frames;
  }

  void merge(const EpisodeMetrics& m) {
    segments += m.segments;
    frames += m.frames;
    scored_frames += m.scored_frames;
    recall_sum += m.recall_sum;
    ku_on_frames += m.ku_on_frames;
    ku_active_frames += m.ku_active_frames;
    util_frames += m.util_frames;
    model_frames += m.model_frames;
    energy_mj += m.energy_mj;
    reward_sum += m.reward_sum;
    for (std::size_t c = 0; c < 3; ++c) {
      raw_sum[c] += m.raw_sum[c];
      by_class[c].frames += m.by_class[c].frames;
      by_class[c].ku_frames += m.by_class[c].ku_frames;
      by_class[c].util_frames += m.by_class[c].util_frames;
    }
  }
};

struct SegmentRecord {
  SegmentOutcome outcome;
  double reward = 0.0;
};

// Runs one episode to the end of the trace. The normalizer is used as given
// (freeze it for evaluation).
inline EpisodeMetrics run_episode(Environment& env, const Controller& policy, const RewardVector& alphas,
                                  RewardNormalizer& norm, std::vector<SegmentRecord>* log = nullptr) {
  EpisodeMetrics m;
  StateVector state = env.reset();
  while (!env.done()) {
    const auto step = env.run_segment(policy(state));
    const double r = reward(step.outcome, alphas, norm);
    m.add(step.outcome, r);
    if (log) log->push_back({step.outcome, r});
    state = step.state;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training

struct TrainLogRow {
  int episode = 0;
  std::string video;
  double quality = 0.0;
  double epsilon = 0.0;
  long decisions = 0;
  double loss = 0.0;
  EpisodeMetrics metrics;
};

struct TrainResult {
  drl::Mlp network;
  RewardNormalizer normalizer;
  std::vector<TrainLogRow> log;
  Split split;
};

inline RewardNormalizer make_normalizer(const ExperimentConfig& cfg) {
  return RewardNormalizer(cfg.standardize_reward, cfg.reward_clip);
}

// Epsilon-greedy double-DQN over the training videos. Each episode draws a
// video and a channel quality; `on_episode` sees every finished episode and
// the online network after it.
inline TrainResult train(const ExperimentConfig& cfg, const std::vector<Video>& suite, const Split& split,
                         std::uint64_t seed,
                         const std::function<void(const TrainLogRow&, const drl::Mlp&)>& on_episode = {}) {
  if (split.train.empty()) throw Error(ErrorKind::kConfig, "no training videos");
  drl::DqnLearner learner(state_size(cfg), kActionCount, cfg.trainer, seed);
  RewardNormalizer norm = make_normalizer(cfg);
  Rng pick = Rng::stream(seed, 21);
  long decisions = 0;
  long since_update = 0;
  TrainResult result;
  result.split = split;

  for (int ep = 0; ep < cfg.trainer.episodes; ++ep) {
    const int v = split.train[pick.uniform_index(split.train.size())];
    const double q = cfg.channel_qualities[pick.uniform_index(cfg.channel_qualities.size())];
    const auto& video = suite[static_cast<std::size_t>(v)];
    Environment env(video.trace, make_env_config(cfg, q), derive_seed(seed, 3000, static_cast<std::uint64_t>(ep)));

    TrainLogRow row;
    row.episode = ep;
    row.video = video.name;
    row.quality = q;
    row.epsilon = drl::epsilon_at(cfg.trainer, decisions);
    double loss_sum = 0.0;
    long updates = 0;

    StateVector state = env.reset();
    while (!env.done()) {
      const double eps = drl::epsilon_at(cfg.trainer, decisions);
      const int a = learner.act(state.values, eps);
      const auto step = env.run_segment(Action::from_index(a));
      const double r = reward(step.outcome, cfg.alphas, norm);
      row.metrics.add(step.outcome, r);
      learner.remember({state.values, a, r, step.state.values, step.done});
      ++decisions;
      if (learner.ready() && ++since_update >= cfg.trainer.train_every) {
        since_update = 0;
        loss_sum += learner.train_step();
        ++updates;
      }
      state = step.state;
    }
    row.decisions = decisions;
    row.loss = updates > 0 ? loss_sum / updates : 0.0;
    if (on_episode) on_episode(row, learner.online());
    result.log.push_back(std::move(row));
  }
  norm.freeze();
  result.network = learner.online();
  result.normalizer = norm;
  return result;
}

// Normalizer statistics are stored next to the checkpoint so evaluation
// rewards use the frozen training scale.
inline void save_normalizer(const std::string& path, const RewardNormalizer& n) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  out << "edgetrack-reward-norm 1\n";
  out << (n.enabled() ? 1 : 0) << ' ' << format_real(n.clip()) << ' ' << n.count() << '\n';
  for (std::size_t k = 0; k < 3; ++k) {
    out << format_real(n.mean()[k]) << ' ' << format_real(n.m2()[k]) << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
}

inline RewardNormalizer load_normalizer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingCheckpoint, "missing normalizer '" + path + "'");
  std::string tag;
  int version = 0, enabled = 0;
  double clip = 0.0;
  long count = 0;
  RewardVector mean{}, m2{};
  in >> tag >> version >> enabled >> clip >> count;
  for (std::size_t k = 0; k < 3; ++k) in >> mean[k] >> m2[k];
  if (!in || tag != "edgetrack-reward-norm" || version != 1) {
    throw Error(ErrorKind::kCheckpoint, "malformed normalizer '" + path + "'");
  }
  RewardNormalizer n(enabled != 0, clip);
  n.restore(count, mean, m2);
  n.freeze();
  return n;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  std::string policy;
  std::string video;
  double quality = 0.0;
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
  std::vector<SegmentRecord> segments;  // filled when requested
};

// Every policy runs on the same (video, quality, seed) cells.
inline std::vector<EvalRow> evaluate(const ExperimentConfig& cfg, const std::vector<Video>& suite,
                                     const std::vector<int>& videos, const std::vector<PolicySpec>& policies,
                                     const std::vector<drl::Mlp*>& networks, const RewardNormalizer& norm,
                                     std::uint64_t seed, bool keep_segments = false) {
  std::vector<EvalRow> rows;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    const auto& spec = policies[p];
    Controller ctl = spec.kind == PolicySpec::Kind::kFixed ? fixed_controller(spec.action)
                                                           : greedy_controller(*networks.at(p));
    for (int v : videos) {
      for (double q : cfg.channel_qualities) {
        for (int s = 0; s < cfg.eval_seeds; ++s) {
          const std::uint64_t env_seed = derive_seed(seed, 4000 + static_cast<std::uint64_t>(v),
                                                     static_cast<std::uint64_t>(s) * 131 +
                                                         static_cast<std::uint64_t>(std::lround(q)));
          Environment env(suite[static_cast<std::size_t>(v)].trace, make_env_config(cfg, q), env_seed);
          RewardNormalizer frozen = norm;
          frozen.freeze();
          EvalRow row;
          row.policy = spec.name;
          row.video = suite[static_cast<std::size_t>(v)].name;
          row.quality = q;
          row.seed = env_seed;
          row.metrics = run_episode(env, ctl, cfg.alphas, frozen, keep_segments ? &row.segments : nullptr);
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Sweeps

// A fixed-action scenario on synthetic traces of one speed.
struct Scenario {
  double speed = 0.1;
  MotionPattern pattern = MotionPattern::kLinearBounce;
  Action action;
  std::optional<double> latency_s;  // injected; the channel is bypassed
  bool ground_truth = true;
  double quality = kReferenceQualityIndex;
};

struct ScenarioResult {
  std::vector<double> mar;  // one per seed
  std::vector<double> ku_fraction;
  double mean_mar = 0.0;
  double mean_ku_fraction = 0.0;
};

// Seed s uses trace seed and environment seed derived from (base, s), so
// scenarios that differ only in the action or latency share traces.
inline ScenarioResult run_scenario(const ExperimentConfig& cfg, const Scenario& sc, int seeds, std::uint64_t base) {
  ScenarioResult r;
  EnvConfig ec = make_env_config(cfg, sc.quality);
  ec.injected_latency_s = sc.latency_s;
  ec.ground_truth_detections = sc.ground_truth;
  RewardNormalizer norm(false);
  const Controller ctl = fixed_controller(sc.action);
  for (int s = 0; s < seeds; ++s) {
    const auto us = static_cast<std::uint64_t>(s);
    auto trace = std::make_shared<const GroundTruthTrace>(
        synth_trace(synth_config(cfg.suite, sc.speed, sc.pattern), derive_seed(base, 5000, us)));
    Environment env(trace, ec, derive_seed(base, 6000, us));
    const auto m = run_episode(env, ctl, cfg.alphas, norm);
    r.mar.push_back(m.mar());
    r.ku_fraction.push_back(m.ku_fraction());
  }
  for (std::size_t i = 0; i < r.mar.size(); ++i) {
    r.mean_mar += r.mar[i] / static_cast<double>(r.mar.size());
    r.mean_ku_fraction += r.ku_fraction[i] / static_cast<double>(r.mar.size());
  }
  return r;
}

enum class SweepAxis { kLatency, kMotion, kChannel, kModel, kPeriod };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "latency") return SweepAxis::kLatency;
  if (s == "motion") return SweepAxis::kMotion;
  if (s == "channel") return SweepAxis::kChannel;
  if (s == "model") return SweepAxis::kModel;
  if (s == "period") return SweepAxis::kPeriod;
  throw Error(ErrorKind::kConfig, "unknown sweep axis '" + s + "'");
}

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kLatency: return "latency";
    case SweepAxis::kMotion: return "motion";
    case SweepAxis::kChannel: return "channel";
    case SweepAxis::kModel: return "model";
    case SweepAxis::kPeriod: return "period";
  }
  return "?";
}

inline std::vector<bool> parse_ku(const std::string& s) {
  if (s == "on") return {true};
  if (s == "off") return {false};
  if (s == "both") return {false, true};
  throw Error(ErrorKind::kConfig, "ku must be on, off or both");
}

struct SweepCell {
  std::string axis;
  double axis_value = 0.0;
  bool katchup = false;
  int model = 0;
  double period_s = 0.0;
  double latency_s = 0.0;  // negative when the channel sets the latency
  double speed = 0.0;
  double quality = 0.0;
  ScenarioResult result;
};

// Grid of axis value x ku x model x period. The latency axis injects the
// latency; the channel axis runs the channel model; the others inject
// sweep.latency_s. Models and periods not on the axis use every listed value.
inline std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<bool>& ku,
                                        std::uint64_t seed) {
  const auto& sw = cfg.sweep;
  const auto pattern = parse_pattern(sw.pattern);
  std::vector<double> values;
  switch (axis) {
    case SweepAxis::kLatency: values = sw.latencies; break;
    case SweepAxis::kMotion: values = sw.motion_speeds; break;
    case SweepAxis::kChannel: values = sw.qualities; break;
    case SweepAxis::kModel:
      for (int m : sw.models) values.push_back(m);
      break;
    case SweepAxis::kPeriod: values = sw.periods_s; break;
  }
  if (values.empty()) throw Error(ErrorKind::kConfig, "sweep axis '" + to_string(axis) + "' has no values");
  const std::vector<int> models = axis == SweepAxis::kModel ? std::vector<int>{0} : sw.models;
  const std::vector<double> periods = axis == SweepAxis::kPeriod ? std::vector<double>{0.0} : sw.periods_s;

  std::vector<SweepCell> cells;
  for (double v : values) {
    for (bool k : ku) {
      for (int m : models) {
        for (double p : periods) {
          SweepCell c;
          c.axis = to_string(axis);
          c.axis_value = v;
          c.katchup = k;
          c.model = axis == SweepAxis::kModel ? static_cast<int>(v) : m;
          c.period_s = axis == SweepAxis::kPeriod ? v : p;
          c.speed = axis == SweepAxis::kMotion ? v : sw.speed;
          c.quality = axis == SweepAxis::kChannel ? v : kReferenceQualityIndex;
          c.latency_s = axis == SweepAxis::kLatency ? v : (axis == SweepAxis::kChannel ? -1.0 : sw.latency_s);
          if (c.model < 0 || c.model >= kModelChoices) throw Error(ErrorKind::kConfig, "model index out of range");

          Scenario sc;
          sc.speed = c.speed;
          sc.pattern = pattern;
          sc.action = Action{k, period_index_for(c.period_s, cfg.suite.fps), c.model};
          if (c.latency_s >= 0.0) sc.latency_s = c.latency_s;
          sc.ground_truth = axis == SweepAxis::kChannel || axis == SweepAxis::kModel ? false : sw.ground_truth;
          sc.quality = c.quality;
          c.result = run_scenario(cfg, sc, sw.seeds, seed);
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Calibration

inline Scenario anchor_scenario(const ExperimentConfig& cfg, const CalibrationAnchor& a) {
  Scenario sc;
  sc.speed = a.speed;
  sc.pattern = parse_pattern(cfg.sweep.pattern);
  sc.action = Action{a.katchup, period_index_for(a.period_s, cfg.suite.fps), a.model};
  sc.latency_s = a.latency_s;
  sc.ground_truth = a.ground_truth;
  return sc;
}

struct CalibrationResult {
  ExperimentConfig config;
  std::vector<double> residuals;  // simulated minus target, per anchor
  int iterations = 0;             // accepted coordinate moves
  int evaluations = 0;
  bool converged = false;
  double loss = 0.0;
};

// Parameters searched: tracker eta, loss_c0, loss_c1 and multipliers on
// every detector's miss probability and box jitter.
inline constexpr int kCalibrationParams = 5;

inline ExperimentConfig with_calibration_params(const ExperimentConfig& base, const std::array<double, 5>& x) {
  ExperimentConfig c = base;
  c.tracker.eta = x[0];
  c.tracker.loss_c0 = x[1];
  c.tracker.loss_c1 = x[2];
  for (std::size_t i = 0; i < c.detectors.size(); ++i) {
    c.detectors[i].miss_prob = std::clamp(base.detectors[i].miss_prob * x[3], 0.0, 1.0);
    c.detectors[i].box_jitter = base.detectors[i].box_jitter * x[4];
  }
  return c;
}

inline std::vector<double> anchor_residuals(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<double> res;
  for (const auto& a : cfg.calibration.anchors) {
    const auto r = run_scenario(cfg, anchor_scenario(cfg, a), cfg.calibration.seeds, seed);
    res.push_back(r.mean_mar - a.target_mar);
  }
  return res;
}

inline bool within_threshold(const std::vector<double>& res, double threshold) {
  return std::all_of(res.begin(), res.end(), [&](double r) { return std::abs(r) < threshold; });
}

// Coordinate search with a shrinking relative step; stops as soon as every
// anchor residual is under the threshold.
inline CalibrationResult calibrate(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.calibration.anchors.empty()) throw Error(ErrorKind::kInvalidConfig, "calibration needs at least one anchor");
  const auto& cc = cfg.calibration;
  std::array<double, 5> x{cfg.tracker.eta, cfg.tracker.loss_c0, cfg.tracker.loss_c1, 1.0, 1.0};
  const std::array<double, 5> lo{1e-3, 0.0, 1e-3, 0.0, 0.0};
  const std::array<double, 5> hi{5.0, 1.0, 10.0, 20.0, 20.0};

  auto loss_of = [](const std::vector<double>& r) {
    double l = 0.0;
    for (double v : r) l += v * v;
    return l;
  };

  CalibrationResult out;
  auto res = anchor_residuals(cfg, seed);
  ++out.evaluations;
  double best = loss_of(res);
  double step = cc.initial_step;
  for (int round = 0; round < cc.max_rounds && !within_threshold(res, cc.residual_threshold); ++round) {
    bool moved = false;
    for (int k = 0; k < kCalibrationParams; ++k) {
      for (double dir : {1.0, -1.0}) {
        auto trial = x;
        const auto uk = static_cast<std::size_t>(k);
        const double scale = std::max(std::abs(x[uk]), 0.05);
        trial[uk] = std::clamp(x[uk] + dir * step * scale, lo[uk], hi[uk]);
        if (trial[uk] == x[uk]) continue;
        const auto trial_cfg = with_calibration_params(cfg, trial);
        trial_cfg.tracker.validate();
        const auto r = anchor_residuals(trial_cfg, seed);
        ++out.evaluations;
        const double l = loss_of(r);
        if (l < best) {
          best = l;
          x = trial;
          res = r;
          moved = true;
          ++out.iterations;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  out.config = out.iterations > 0 ? with_calibration_params(cfg, x) : cfg;
  out.residuals = res;
  out.loss = best;
  out.converged = within_threshold(res, cc.residual_threshold);
  return out;
}

}  // namespace edgetrack::harness
