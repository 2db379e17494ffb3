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

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgetrack/core.hpp"
#include "edgetrack/edge.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/rng.hpp"
#include "edgetrack/trace.hpp"
#include "edgetrack/tracker.hpp"

namespace edgetrack {

// ---------------------------------------------------------------------------
// Actions

inline constexpr std::array<int, 3> kPeriodFrames{5, 10, 15};
inline constexpr int kMaxPeriodFrames = 15;
inline constexpr int kModelChoices = 3;
inline constexpr int kActionCount = 2 * 3 * kModelChoices;

struct Action {
  bool katchup = false;
  int period_idx = 0;
  int model_idx = 0;

  bool valid() const {
    return period_idx >= 0 && period_idx < 3 && model_idx >= 0 && model_idx < kModelChoices;
  }
  int index() const { return (katchup ? 9 : 0) + period_idx * 3 + model_idx; }
  int period_frames() const { return kPeriodFrames[static_cast<std::size_t>(period_idx)]; }

  static Action from_index(int index) {
    if (index < 0 || index >= kActionCount) {
      throw Error(ErrorKind::kInvalidAction, "action index " + std::to_string(index));
    }
    return {index >= 9, (index % 9) / 3, index % 3};
  }

  friend bool operator==(const Action&, const Action&) = default;
};

// Channel/edge utilization index: period 15, 10, 5 maps to 0, 0.5, 1.
inline double utilization_index(int period_frames) {
  return (kMaxPeriodFrames - period_frames) / 10.0;
}

inline double model_index_norm(int model_idx) { return model_idx / double(kModelChoices - 1); }

// ---------------------------------------------------------------------------
// State features

inline constexpr int kFeaturesPerRow = 8;

// Raw (unnormalized) features gathered at one decision instant.
struct FeatureRow {
  double image_bytes = 0.0;
  double motion = 0.0;
  double latency_s = 0.0;
  double ku_fraction = 0.0;
  double katchup = 0.0;
  double period_frames = 0.0;
  double model_idx = 0.0;
  double selfeval_iou = 0.0;
};

struct StateNormalization {
  double image_size_max = 138800.0;
  double latency_cap = 2.0;
  double motion_cap = 0.3;
  double period_max = kMaxPeriodFrames;
  double model_max = kModelChoices - 1;
};

// Window of N feature rows, oldest first, flattened row-major.
struct StateVector {
  std::vector<double> values;

  int rows() const { return static_cast<int>(values.size()) / kFeaturesPerRow; }
  std::span<const double> row(int r) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(r) * kFeaturesPerRow,
                                                   kFeaturesPerRow);
  }
  friend bool operator==(const StateVector&, const StateVector&) = default;
};

inline StateVector extract_state(std::span<const FeatureRow> history, int window,
                                 const StateNormalization& norm) {
  if (window <= 0) throw Error(ErrorKind::kInvalidConfig, "state window must be positive");
  StateVector s;
  s.values.assign(static_cast<std::size_t>(window) * kFeaturesPerRow, 0.0);
  const int available = std::min<int>(window, static_cast<int>(history.size()));
  auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (int k = 0; k < available; ++k) {
    const auto& h = history[history.size() - static_cast<std::size_t>(available - k)];
    const std::size_t base = static_cast<std::size_t>(window - available + k) * kFeaturesPerRow;
    s.values[base + 0] = clip(h.image_bytes / norm.image_size_max);
    s.values[base + 1] = clip(h.motion / norm.motion_cap);
    s.values[base + 2] = clip(h.latency_s / norm.latency_cap);
    s.values[base + 3] = clip(h.ku_fraction);
    s.values[base + 4] = clip(h.katchup);
    s.values[base + 5] = clip(h.period_frames / norm.period_max);
    s.values[base + 6] = clip(h.model_idx / norm.model_max);
    s.values[base + 7] = clip(h.selfeval_iou);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Segment outcome and reward

struct SegmentOutcome {
  int decision_index = 0;
  int frame_index = 0;  // decision instant (frame dispatched for detection)
  Action action;
  int frames = 0;         // live frames in the segment
  int scored_frames = 0;  // frames with at least one ground-truth object
  double recall_sum = 0.0;
  double mar = 0.0;
  int ku_frames = 0;  // frame intervals with an active replay job
  double ku_fraction = 0.0;
  double period_norm = 0.0;
  double delta_od_s = 0.0;
  double selfeval_iou = 0.0;
  double energy_mj = 0.0;
  double motion = 0.0;
  MotionClass motion_class = MotionClass::kSlow;
  double channel_quality = 0.0;
};

using RewardVector = std::array<double, 3>;

inline constexpr RewardVector kDefaultAlphas{0.1, 0.2, 0.7};

// mAR, re-tracking abstinence and offloading period; all three are "higher
// is better".
inline RewardVector reward_components(const SegmentOutcome& o) {
  return {o.mar, 1.0 - o.ku_fraction, o.period_norm};
}

// Running z-score per reward component. Statistics update only while not
// frozen; components with a degenerate spread pass through unscaled.
class RewardNormalizer {
 public:
  static constexpr double kMinStd = 1e-8;

  explicit RewardNormalizer(bool enabled = true, double clip = 3.0) : enabled_(enabled), clip_(clip) {}

  void observe(const RewardVector& x) {
    ++count_;
    for (std::size_t k = 0; k < 3; ++k) {
      const double delta = x[k] - mean_[k];
      mean_[k] += delta / static_cast<double>(count_);
      m2_[k] += delta * (x[k] - mean_[k]);
    }
  }

  double stddev(std::size_t k) const {
    return count_ > 1 ? std::sqrt(m2_[k] / static_cast<double>(count_ - 1)) : 0.0;
  }

  RewardVector standardize(const RewardVector& x) const {
    if (!enabled_) return x;
    RewardVector z{};
    for (std::size_t k = 0; k < 3; ++k) {
      const double sd = stddev(k);
      z[k] = sd < kMinStd ? x[k] : std::clamp((x[k] - mean_[k]) / sd, -clip_, clip_);
    }
    return z;
  }

  bool enabled() const { return enabled_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  void unfreeze() { frozen_ = false; }
  double clip() const { return clip_; }
  long count() const { return count_; }
  const RewardVector& mean() const { return mean_; }
  const RewardVector& m2() const { return m2_; }

  void restore(long count, const RewardVector& mean, const RewardVector& m2) {
    count_ = count;
    mean_ = mean;
    m2_ = m2;
  }

 private:
  bool enabled_;
  double clip_;
  bool frozen_ = false;
  long count_ = 0;
  RewardVector mean_{};
  RewardVector m2_{};
};

inline void validate_alphas(const RewardVector& alphas) {
  double sum = 0.0;
  for (double a : alphas) {
    if (!(a >= 0.0)) throw Error(ErrorKind::kInvalidConfig, "reward weights must be non-negative");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::kInvalidConfig, "reward weights must sum to 1");
}

// Weighted sum of the standardized components. Latency and energy do not
// enter: they act only through mAR and re-tracking usage.
inline double reward(const SegmentOutcome& outcome, const RewardVector& alphas, RewardNormalizer& norm) {
  validate_alphas(alphas);
  const RewardVector raw = reward_components(outcome);
  if (norm.enabled() && !norm.frozen()) norm.observe(raw);
  const RewardVector z = norm.standardize(raw);
  return alphas[0] * z[0] + alphas[1] * z[1] + alphas[2] * z[2];
}

// ---------------------------------------------------------------------------
// Environment

struct EnvConfig {
  TrackerParams tracker;
  DetectorTable detectors = server_detector_table();
  ChannelModel channel;
  double server_load_factor = 1.0;
  // When set, every offload takes exactly this long and the channel and
  // server are bypassed.
  std::optional<double> injected_latency_s;
  // Detectors keep their timing but return exact boxes.
  bool ground_truth_detections = false;
  int history_rows = 8;
  StateNormalization norm;
  double iou_threshold = kDefaultIouThreshold;

  void validate() const {
    tracker.validate();
    channel.validate();
    validate_detector_table(detectors);
    if (static_cast<int>(detectors.size()) != kModelChoices) {
      throw Error(ErrorKind::kInvalidConfig, "the action space needs exactly 3 detectors");
    }
    if (history_rows <= 0 || !(server_load_factor > 0.0)) {
      throw Error(ErrorKind::kInvalidConfig, "bad environment sizes");
    }
    if (injected_latency_s && *injected_latency_s < 0.0) {
      throw Error(ErrorKind::kInvalidConfig, "injected latency must be non-negative");
    }
  }
};

struct SegmentStep {
  SegmentOutcome outcome;
  StateVector state;
  bool done = false;
};

// Runs one video as an episode. Process 1 tracks every live frame; a single
// detection request is in flight at a time; decision instants coincide with
// the frames dispatched to the edge server.
class Environment {
 public:
  Environment(std::shared_ptr<const GroundTruthTrace> trace, EnvConfig cfg, std::uint64_t seed)
      : trace_(std::move(trace)),
        cfg_(std::move(cfg)),
        tracker_rng_(Rng::stream(seed, 1)),
        detector_rng_(Rng::stream(seed, 2)),
        channel_rng_(Rng::stream(seed, 3)) {
    if (!trace_ || trace_->frame_count() == 0) {
      throw Error(ErrorKind::kInvalidConfig, "environment needs a non-empty trace");
    }
    cfg_.validate();
    server_.load_factor = cfg_.server_load_factor;
    reset();
  }

  // Bootstraps the tracker with an exact reference for frame 0; the first
  // decision instant is frame 0.
  StateVector reset() {
    process1_ = state_from_detections(trace_->frame(0), 0, *trace_);
    job_.reset();
    pending_.reset();
    server_ = ServerState{0.0, cfg_.server_load_factor};
    channel_state_ = ChannelState{};
    next_frame_ = 0;
    decision_index_ = 0;
    done_ = false;
    history_.assign(1, FeatureRow{});
    process1_frames_ = 0;
    replay_steps_ = 0;
    causality_ok_ = true;
    return current_state();
  }

  SegmentStep run_segment(const Action& action) {
    if (done_) throw Error(ErrorKind::kTraceExhausted, "episode already finished");
    if (!action.valid()) throw Error(ErrorKind::kInvalidAction, "action out of range");

    const int n = trace_->frame_count();
    const int start = next_frame_;
    SegmentOutcome out;
    out.decision_index = decision_index_;
    out.frame_index = start;
    out.action = action;
    out.period_norm = action.period_frames() / static_cast<double>(kMaxPeriodFrames);
    out.channel_quality = cfg_.channel.quality_index;

    const auto& spec = cfg_.detectors[static_cast<std::size_t>(action.model_idx)];
    process_frame(start, out);
    const int apply_frame = dispatch(start, action, spec, out);
    process_recall(start, out);

    const int next_decision = std::max(start + action.period_frames(), apply_frame);
    const int end = std::min(next_decision, n);
    for (int j = start + 1; j < end; ++j) {
      process_frame(j, out);
      process_recall(j, out);
    }
    next_frame_ = end;
    done_ = next_decision >= n;

    out.mar = out.scored_frames > 0 ? out.recall_sum / out.scored_frames : 1.0;
    out.ku_fraction = static_cast<double>(out.ku_frames) / out.frames;
    if (end - 1 > start) {
      out.motion = motion_stat(*trace_, start, end - 1).value;
    } else if (start > 0) {
      out.motion = motion_stat(*trace_, start - 1, start).value;
    }
    out.motion_class = classify_motion(out.motion);

    FeatureRow row;
    row.image_bytes = static_cast<double>(spec.image_size_bytes);
    row.motion = out.motion;
    row.latency_s = out.delta_od_s;
    row.ku_fraction = out.ku_fraction;
    row.katchup = action.katchup ? 1.0 : 0.0;
    row.period_frames = action.period_frames();
    row.model_idx = action.model_idx;
    row.selfeval_iou = out.selfeval_iou;
    history_.push_back(row);
    while (static_cast<int>(history_.size()) > cfg_.history_rows) history_.pop_front();

    ++decision_index_;
    return {out, current_state(), done_};
  }

  StateVector current_state() const {
    const std::vector<FeatureRow> rows(history_.begin(), history_.end());
    return extract_state(rows, cfg_.history_rows, cfg_.norm);
  }

  bool done() const { return done_; }
  int next_frame() const { return next_frame_; }
  const EnvConfig& config() const { return cfg_; }
  const GroundTruthTrace& trace() const { return *trace_; }
  long process1_frames() const { return process1_frames_; }
  long replay_steps() const { return replay_steps_; }
  bool causality_ok() const { return causality_ok_; }

 private:
  struct Pending {
    DetectionResult result;
    int apply_frame = 0;
    bool katchup = false;
  };

  double fps() const { return trace_->meta.fps; }

  void process_frame(int j, SegmentOutcome& out) {
    ++out.frames;
    ++process1_frames_;
    if (j > 0) {
      if (pending_ && pending_->apply_frame == j) {
        apply_result(j);
      } else {
        process1_ = track_step(std::move(process1_), *trace_, j - 1, j, cfg_.tracker, tracker_rng_);
      }
    }
    bool ku_active = false;
    if (job_ && job_created_ < j) {
      ku_active = true;
      ++out.ku_frames;
      const long before = job_->replayed;
      auto advanced = katchup_advance(std::move(*job_), j, cfg_.tracker, *trace_, tracker_rng_);
      if (auto* done = std::get_if<CompletedKatchUp>(&advanced)) {
        replay_steps_ += done->replayed - before;
        process1_ = std::move(done->state);
        job_.reset();
      } else {
        job_ = std::move(std::get<KatchUpJob>(advanced));
        replay_steps_ += job_->replayed - before;
      }
    }
    out.energy_mj += power_draw(ku_active) / fps();
  }

  void apply_result(int j) {
    Pending p = std::move(*pending_);
    pending_.reset();
    if (p.result.arrival_time_s > j / fps() + 1e-9) causality_ok_ = false;
    job_.reset();  // a fresher reference supersedes any replay still running
    auto applied = apply_od_reference(p.result.detections, p.result.frame_index, j, p.katchup,
                                      cfg_.tracker, *trace_, tracker_rng_);
    if (auto* state = std::get_if<TrackerState>(&applied)) {
      process1_ = std::move(*state);
    } else {
      // Process 1 keeps tracking the live frame while the replay starts.
      process1_ = track_step(std::move(process1_), *trace_, j - 1, j, cfg_.tracker, tracker_rng_);
      job_ = std::move(std::get<KatchUpJob>(applied));
      job_created_ = j;
    }
  }

  int dispatch(int j, const Action& action, const DetectorModelSpec& spec, SegmentOutcome& out) {
    const auto snapshot = predictions(process1_);
    DetectionResult result;
    if (cfg_.injected_latency_s) {
      result.frame_index = j;
      result.model_id = action.model_idx;
      result.delta_od_s = *cfg_.injected_latency_s;
      result.arrival_time_s = j / fps() + result.delta_od_s;
      result.detections = detect(detector_for(spec), trace_->frame(j), detector_rng_);
    } else {
      const OffloadRequest request{j, action.model_idx, j / fps()};
      DetectorTable table = cfg_.detectors;
      if (cfg_.ground_truth_detections) {
        for (auto& s : table) s = ground_truth_detector(s);
      }
      result = serve(request, table, server_, cfg_.channel, channel_state_, *trace_, channel_rng_,
                     detector_rng_);
    }
    out.delta_od_s = result.delta_od_s;
    out.selfeval_iou = selfeval(result.detections, snapshot);

    const int apply_frame = j + staleness_frames(result.delta_od_s, fps());
    if (apply_frame == j) {
      job_.reset();
      process1_ = state_from_detections(result.detections, j, *trace_);
    } else {
      pending_ = Pending{std::move(result), apply_frame, action.katchup};
    }
    return apply_frame;
  }

  DetectorModelSpec detector_for(const DetectorModelSpec& spec) const {
    return cfg_.ground_truth_detections ? ground_truth_detector(spec) : spec;
  }

  // Mean IoU between each received detection and the running tracker's
  // estimate of the same object on the dispatched frame.
  static double selfeval(std::span<const ObjectDescriptor> detections,
                         std::span<const ObjectDescriptor> tracked) {
    if (detections.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& d : detections) {
      for (const auto& t : tracked) {
        if (t.object_id == d.object_id) {
          sum += iou(d.box, t.box);
          break;
        }
      }
    }
    return sum / static_cast<double>(detections.size());
  }

  void process_recall(int j, SegmentOutcome& out) const {
    const auto& truth = trace_->frame(j);
    if (truth.empty()) return;
    const auto pred = predictions(process1_);
    out.recall_sum += frame_recall(truth, pred, cfg_.iou_threshold);
    ++out.scored_frames;
  }

  std::shared_ptr<const GroundTruthTrace> trace_;
  EnvConfig cfg_;
  Rng tracker_rng_;
  Rng detector_rng_;
  Rng channel_rng_;
  ServerState server_;
  ChannelState channel_state_;

  TrackerState process1_;
  std::optional<KatchUpJob> job_;
  int job_created_ = 0;
  std::optional<Pending> pending_;

  int next_frame_ = 0;
  int decision_index_ = 0;
  bool done_ = false;
  std::deque<FeatureRow> history_;

  long process1_frames_ = 0;
  long replay_steps_ = 0;
  bool causality_ok_ = true;
};

}  // namespace edgetrack
