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
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "edgetrack/core.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/rng.hpp"
#include "edgetrack/trace.hpp"

namespace edgetrack {

// Box-level tracker error model. Each tracking step adds zero-mean Gaussian
// center drift proportional to the ground-truth displacement it has to
// follow, and may lose the target when the displacement is large.
struct TrackerParams {
  double eta = 0.12;               // drift std per pixel of displacement
  double loss_c0 = 0.005;          // displacement (frame widths) where loss risk starts
  double loss_c1 = 1.0;            // width of the loss-risk ramp
  double iou_lost_threshold = 0.2;
  double ku_speed = 5.0;           // replay frames per live frame interval; may be +inf

  void validate() const {
    if (!(eta >= 0.0) || !(loss_c1 > 0.0) || !(iou_lost_threshold > 0.0 && iou_lost_threshold < 1.0)) {
      throw Error(ErrorKind::kInvalidConfig, "tracker parameters out of range");
    }
    if (!(ku_speed > 1.0)) throw Error(ErrorKind::kInvalidConfig, "ku_speed must exceed 1");
  }
};

struct TrackedObject {
  int object_id = 0;
  int label = 0;
  BoundingBox est_box;
  Vec2 drift;        // estimated center minus ground-truth center
  bool lost = false;
  int ref_frame = 0;  // detection frame this chain started from

  friend bool operator==(const TrackedObject&, const TrackedObject&) = default;
};

using TrackerState = std::vector<TrackedObject>;

inline std::vector<ObjectDescriptor> predictions(std::span<const TrackedObject> state) {
  std::vector<ObjectDescriptor> out;
  out.reserve(state.size());
  for (const auto& o : state) {
    if (!o.lost) out.push_back({o.object_id, o.label, o.est_box});
  }
  return out;
}

// Tracker state seeded from detector output for `od_frame`. Detections with
// no ground-truth counterpart start out lost.
inline TrackerState state_from_detections(std::span<const ObjectDescriptor> detections,
                                          int od_frame, const GroundTruthTrace& trace) {
  TrackerState state;
  state.reserve(detections.size());
  for (const auto& d : detections) {
    TrackedObject o{d.object_id, d.label, d.box, {}, false, od_frame};
    if (const auto* gt = trace.find(od_frame, d.object_id)) {
      o.drift = d.box.center() - gt->box.center();
    } else {
      o.lost = true;
    }
    state.push_back(o);
  }
  return state;
}

// Advances every live estimate from `from_frame` to `to_frame` in a single
// tracker invocation. A multi-frame span models applying a stale reference:
// the drift noise scales with the whole displacement, not its square root.
inline TrackerState track_step(TrackerState state, const GroundTruthTrace& trace, int from_frame,
                               int to_frame, const TrackerParams& params, Rng& rng) {
  if (from_frame < 0 || to_frame >= trace.frame_count() || from_frame >= to_frame) {
    throw Error(ErrorKind::kFrameOutOfRange, "track_step " + std::to_string(from_frame) + " -> " +
                                                 std::to_string(to_frame));
  }
  const double width = trace.meta.width;
  for (auto& o : state) {
    if (o.lost) continue;
    const auto* gt_to = trace.find(to_frame, o.object_id);
    const auto* gt_from = trace.find(from_frame, o.object_id);
    if (gt_to == nullptr || gt_from == nullptr) {
      o.lost = true;
      continue;
    }
    const Vec2 displacement = gt_to->box.center() - gt_from->box.center();
    const double d = displacement.norm();
    const double sd = params.eta * d;
    const Vec2 noise{rng.normal(0.0, sd), rng.normal(0.0, sd)};
    const double loss_p = std::clamp((d / width - params.loss_c0) / params.loss_c1, 0.0, 1.0);
    const bool dropped = rng.uniform() < loss_p;

    if (d > 0.0 || !(gt_to->box == gt_from->box)) {
      o.drift = o.drift + noise;
      o.est_box = BoundingBox::centered(gt_to->box.center() + o.drift, gt_to->box.w, gt_to->box.h);
    }
    if (dropped || iou(o.est_box, gt_to->box) < params.iou_lost_threshold) o.lost = true;
  }
  return state;
}

// Process 2 of the re-tracking scheme: a replay chain seeded from a detection
// that is tracked frame by frame, faster than real time, until it reaches the
// live frame. `replay_frame` is the next frame the replay will track; the
// objects hold estimates for replay_frame - 1.
struct KatchUpJob {
  int start_frame = 0;
  int replay_frame = 0;
  TrackerState objects;
  bool active = false;
  long calls = 0;     // live frame intervals consumed so far
  long replayed = 0;  // single-frame steps performed so far
};

struct CompletedKatchUp {
  TrackerState state;
  int completion_frame = 0;
  long replayed = 0;  // total single-frame steps the job performed
};

// Either a fresh Process-1 state (no re-tracking) or a replay job.
using OdApplication = std::variant<TrackerState, KatchUpJob>;

inline OdApplication apply_od_reference(std::span<const ObjectDescriptor> detections, int od_frame,
                                        int apply_frame, bool katchup, const TrackerParams& params,
                                        const GroundTruthTrace& trace, Rng& rng) {
  if (apply_frame < od_frame) {
    throw Error(ErrorKind::kNegativeStaleness, "reference applied before its frame");
  }
  TrackerState seeded = state_from_detections(detections, od_frame, trace);
  if (apply_frame == od_frame) return seeded;
  if (!katchup) return track_step(std::move(seeded), trace, od_frame, apply_frame, params, rng);
  return KatchUpJob{od_frame, od_frame + 1, std::move(seeded), true, 0, 0};
}

// One live frame interval of replay. Fractional speeds accumulate: after k
// calls the job has performed floor(k * ku_speed) steps, capped at the live
// frame. Returns the finished chain once it produces `live_frame`.
inline std::variant<KatchUpJob, CompletedKatchUp> katchup_advance(KatchUpJob job, int live_frame,
                                                                  const TrackerParams& params,
                                                                  const GroundTruthTrace& trace,
                                                                  Rng& rng) {
  if (!job.active) throw Error(ErrorKind::kInactiveJob, "katchup_advance on inactive job");
  int held = job.replay_frame - 1;
  if (live_frame < held) {
    throw Error(ErrorKind::kFrameOutOfRange, "live frame behind the replay");
  }
  ++job.calls;
  long budget = std::numeric_limits<long>::max();
  if (std::isfinite(params.ku_speed)) {
    const auto allowed = static_cast<long>(std::floor(static_cast<double>(job.calls) * params.ku_speed + 1e-9));
    budget = allowed - job.replayed;
  }
  while (budget > 0 && held < live_frame) {
    job.objects = track_step(std::move(job.objects), trace, held, held + 1, params, rng);
    ++held;
    ++job.replayed;
    --budget;
  }
  job.replay_frame = held + 1;
  if (held == live_frame) {
    job.active = false;
    return CompletedKatchUp{std::move(job.objects), live_frame, job.replayed};
  }
  return job;
}

// Live frame intervals a replay needs to catch up with a gap of `gap` frames:
// after k intervals the replay sits at i + k*s and the live frame at i + n + k.
inline int catchup_intervals(int gap, double ku_speed) {
  if (gap <= 0) return 0;
  if (!std::isfinite(ku_speed)) return 1;
  return static_cast<int>(std::ceil(static_cast<double>(gap) / (ku_speed - 1.0) - 1e-9));
}

// Staleness, in frames, of a reference with latency `delta_s`.
inline int staleness_frames(double delta_s, double fps) {
  if (delta_s <= 0.0) return 0;
  return static_cast<int>(std::ceil(delta_s * fps - 1e-9));
}

}  // namespace edgetrack
