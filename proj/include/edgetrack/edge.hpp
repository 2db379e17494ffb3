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
#include <span>
#include <string>
#include <vector>

#include "edgetrack/core.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/rng.hpp"
#include "edgetrack/trace.hpp"

namespace edgetrack {

// One detector the edge server can run. Timing and input size come from
// measured EfficientDet numbers; miss_prob and box_jitter shape the quality
// of the reference it hands to the tracker.
struct DetectorModelSpec {
  int model_id = 0;
  std::string name;
  double compute_time_s = 0.0;
  long image_size_bytes = 0;
  double miss_prob = 0.0;
  double box_jitter = 0.0;  // center noise std, fraction of the box diagonal
};

using DetectorTable = std::vector<DetectorModelSpec>;

// GTX 980 Ti server column.
inline DetectorTable server_detector_table() {
  return {
      {0, "EffDet-D0", 0.089, 52150, 0.15, 0.05},
      {1, "EffDet-D2", 0.16, 93300, 0.08, 0.03},
      {2, "EffDet-D4", 0.4, 138800, 0.04, 0.02},
  };
}

// Quadro P600 laptop column.
inline DetectorTable laptop_detector_table() {
  auto table = server_detector_table();
  table[0].compute_time_s = 0.12;
  table[1].compute_time_s = 0.33;
  table[2].compute_time_s = 1.08;
  return table;
}

inline DetectorModelSpec ground_truth_detector(const DetectorModelSpec& timing) {
  DetectorModelSpec spec = timing;
  spec.name = "ground-truth";
  spec.miss_prob = 0.0;
  spec.box_jitter = 0.0;
  return spec;
}

inline void validate_detector_table(std::span<const DetectorModelSpec> table) {
  if (table.empty()) throw Error(ErrorKind::kInvalidConfig, "empty detector table");
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& s = table[i];
    if (s.model_id != static_cast<int>(i)) {
      throw Error(ErrorKind::kInvalidConfig, "detector model ids must be 0..n-1 in order");
    }
    if (s.compute_time_s < 0.0 || s.image_size_bytes <= 0 || !(s.miss_prob >= 0.0 && s.miss_prob < 1.0) ||
        s.box_jitter < 0.0) {
      throw Error(ErrorKind::kInvalidConfig, "detector " + s.name + " has out-of-range fields");
    }
    if (i == 0) continue;
    const auto& p = table[i - 1];
    if (!(s.compute_time_s > p.compute_time_s && s.image_size_bytes > p.image_size_bytes)) {
      throw Error(ErrorKind::kInvalidConfig, "compute time and image size must grow with model id");
    }
    if (!(s.miss_prob < p.miss_prob && s.box_jitter < p.box_jitter)) {
      throw Error(ErrorKind::kInvalidConfig, "miss_prob and box_jitter must shrink with model id");
    }
  }
}

// Each surviving object's center is perturbed by Gaussian noise; labels are
// never confused. Every object consumes the same number of draws whether or
// not it is missed.
inline std::vector<ObjectDescriptor> detect(const DetectorModelSpec& spec,
                                            std::span<const ObjectDescriptor> truth, Rng& rng) {
  std::vector<ObjectDescriptor> out;
  out.reserve(truth.size());
  for (const auto& t : truth) {
    const bool missed = rng.uniform() < spec.miss_prob;
    const double sd = spec.box_jitter * t.box.diagonal();
    const double nx = rng.normal(0.0, sd);
    const double ny = rng.normal(0.0, sd);
    if (missed) continue;
    ObjectDescriptor d = t;
    if (sd > 0.0) {
      d.box.x += nx;
      d.box.y += ny;
    }
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wireless link

inline constexpr double kReferenceQualityIndex = 44.0;

struct ChannelModel {
  double quality_index = kReferenceQualityIndex;
  double base_rate_bps = 40e6;  // mean rate at the reference quality index
  double rate_jitter = 0.3;     // relative std of the per-transfer rate
  double overhead_s = 0.02;
  double evolution = 0.8;       // AR(1) coefficient across transfers

  double mean_rate_bps() const { return base_rate_bps * (quality_index / kReferenceQualityIndex); }

  void validate() const {
    if (!(quality_index > 0.0) || !(base_rate_bps > 0.0) || !(rate_jitter >= 0.0 && rate_jitter < 1.0) ||
        overhead_s < 0.0 || !(evolution >= 0.0 && evolution < 1.0)) {
      throw Error(ErrorKind::kInvalidConfig, "channel parameters out of range");
    }
  }
};

// AR(1) state of the normalized rate deviation.
struct ChannelState {
  double deviation = 0.0;
};

inline double sample_comm_time(const ChannelModel& ch, ChannelState& state, long bytes, Rng& rng) {
  if (bytes <= 0) throw Error(ErrorKind::kInvalidConfig, "transfer size must be positive");
  const double rho = ch.evolution;
  state.deviation = rho * state.deviation + std::sqrt(1.0 - rho * rho) * rng.normal();
  const double mean = ch.mean_rate_bps();
  const double rate = std::clamp(mean * (1.0 + ch.rate_jitter * state.deviation), 0.05 * mean, 4.0 * mean);
  return static_cast<double>(bytes) * 8.0 / rate + ch.overhead_s;
}

// ---------------------------------------------------------------------------
// Edge server

struct ServerState {
  double busy_until_s = 0.0;
  double load_factor = 1.0;  // multiplies compute time to mimic background load
};

struct OffloadRequest {
  int frame_index = 0;
  int model_id = 0;
  double send_time_s = 0.0;
};

struct DetectionResult {
  int frame_index = 0;
  int model_id = 0;
  std::vector<ObjectDescriptor> detections;
  double comm_time_s = 0.0;
  double queue_wait_s = 0.0;
  double compute_time_s = 0.0;
  double delta_od_s = 0.0;
  double arrival_time_s = 0.0;
};

// Upload, FIFO wait, compute. The returned boxes travel back inside the
// per-transfer overhead.
inline DetectionResult serve(const OffloadRequest& request, std::span<const DetectorModelSpec> table,
                             ServerState& server, const ChannelModel& channel,
                             ChannelState& channel_state, const GroundTruthTrace& trace,
                             Rng& channel_rng, Rng& detector_rng) {
  if (request.model_id < 0 || request.model_id >= static_cast<int>(table.size())) {
    throw Error(ErrorKind::kUnknownModel, "model " + std::to_string(request.model_id));
  }
  const auto& spec = table[static_cast<std::size_t>(request.model_id)];
  DetectionResult r;
  r.frame_index = request.frame_index;
  r.model_id = request.model_id;
  r.comm_time_s = sample_comm_time(channel, channel_state, spec.image_size_bytes, channel_rng);
  const double at_server = request.send_time_s + r.comm_time_s;
  r.queue_wait_s = std::max(0.0, server.busy_until_s - at_server);
  r.compute_time_s = spec.compute_time_s * server.load_factor;
  server.busy_until_s = at_server + r.queue_wait_s + r.compute_time_s;
  r.delta_od_s = r.comm_time_s + r.queue_wait_s + r.compute_time_s;
  r.arrival_time_s = request.send_time_s + r.delta_od_s;
  r.detections = detect(spec, trace.frame(request.frame_index), detector_rng);
  return r;
}

// ---------------------------------------------------------------------------
// Mobile power

inline constexpr double kPowerTrackingMw = 3512.0;
inline constexpr double kPowerKatchUpMw = 3939.0;

inline double power_draw(bool ku_active) { return ku_active ? kPowerKatchUpMw : kPowerTrackingMw; }

// Mean draw when a fraction of frame intervals run with re-tracking active.
inline double mean_power_mw(double ku_fraction) {
  return kPowerTrackingMw + (kPowerKatchUpMw - kPowerTrackingMw) * ku_fraction;
}

}  // namespace edgetrack
