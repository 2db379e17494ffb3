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
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "edgetrack/core.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/format.hpp"
#include "edgetrack/rng.hpp"

namespace edgetrack {

struct TraceMeta {
  double fps = 10.0;
  int width = 1280;
  int height = 720;
  int frame_count = 0;

  friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

// Per-frame, per-object annotated boxes for one video. Immutable once built;
// frames[i] holds the descriptors of frame i.
struct GroundTruthTrace {
  TraceMeta meta;
  std::vector<std::vector<ObjectDescriptor>> frames;

  int frame_count() const { return meta.frame_count; }

  const std::vector<ObjectDescriptor>& frame(int index) const {
    if (index < 0 || index >= frame_count()) {
      throw Error(ErrorKind::kFrameOutOfRange, "frame " + std::to_string(index));
    }
    return frames[static_cast<std::size_t>(index)];
  }

  const ObjectDescriptor* find(int index, int object_id) const {
    for (const auto& d : frame(index)) {
      if (d.object_id == object_id) return &d;
    }
    return nullptr;
  }

  friend bool operator==(const GroundTruthTrace&, const GroundTruthTrace&) = default;
};

// Throws ValidationError on the first broken invariant.
inline void validate(const GroundTruthTrace& trace) {
  const auto& m = trace.meta;
  if (!(m.fps > 0.0) || m.width <= 0 || m.height <= 0 || m.frame_count < 0) {
    throw Error(ErrorKind::kValidation, "bad trace meta");
  }
  if (static_cast<int>(trace.frames.size()) != m.frame_count) {
    throw Error(ErrorKind::kValidation, "frame vector size does not match frame_count");
  }
  for (int i = 0; i < m.frame_count; ++i) {
    const auto& f = trace.frames[static_cast<std::size_t>(i)];
    for (std::size_t a = 0; a < f.size(); ++a) {
      if (!f[a].box.valid()) {
        throw Error(ErrorKind::kValidation,
                    "non-positive box size in frame " + std::to_string(i));
      }
      for (std::size_t b = a + 1; b < f.size(); ++b) {
        if (f[a].object_id == f[b].object_id) {
          throw Error(ErrorKind::kValidation, "duplicate object_id " +
                                                  std::to_string(f[a].object_id) +
                                                  " in frame " + std::to_string(i));
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Text format
//
//   meta fps=<real> width=<int> height=<int> frames=<int>
//   <frame_index> <object_id> <label> <x> <y> <w> <h>
//   <frame_index>                      (a frame with no objects)
//
// Records are in non-decreasing frame order and every frame index in
// [0, frames) must appear at least once.

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] inline void parse_fail(int line_no, const std::string& what) {
  throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace detail

inline GroundTruthTrace parse_trace(std::istream& in) {
  GroundTruthTrace trace;
  std::string line;
  int line_no = 0;
  bool have_meta = false;
  int last_index = -1;
  std::vector<bool> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (!have_meta) {
      if (tok[0] != "meta" || tok.size() != 5) detail::parse_fail(line_no, "expected meta header");
      bool got_fps = false, got_w = false, got_h = false, got_n = false;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const auto eq = tok[k].find('=');
        if (eq == std::string_view::npos) detail::parse_fail(line_no, "meta field without '='");
        const auto key = tok[k].substr(0, eq);
        const auto val = tok[k].substr(eq + 1);
        bool ok = false;
        if (key == "fps") ok = got_fps = detail::parse_number(val, trace.meta.fps);
        else if (key == "width") ok = got_w = detail::parse_number(val, trace.meta.width);
        else if (key == "height") ok = got_h = detail::parse_number(val, trace.meta.height);
        else if (key == "frames") ok = got_n = detail::parse_number(val, trace.meta.frame_count);
        if (!ok) detail::parse_fail(line_no, "bad meta field '" + std::string(tok[k]) + "'");
      }
      if (!(got_fps && got_w && got_h && got_n)) detail::parse_fail(line_no, "incomplete meta");
      if (trace.meta.frame_count < 0) detail::parse_fail(line_no, "negative frame count");
      trace.frames.assign(static_cast<std::size_t>(trace.meta.frame_count), {});
      seen.assign(static_cast<std::size_t>(trace.meta.frame_count), false);
      have_meta = true;
      continue;
    }
    if (tok.size() != 1 && tok.size() != 7) detail::parse_fail(line_no, "expected 1 or 7 fields");
    int index = 0;
    if (!detail::parse_number(tok[0], index)) detail::parse_fail(line_no, "bad frame index");
    if (index < last_index) {
      throw Error(ErrorKind::kValidation,
                  "line " + std::to_string(line_no) + ": frame indices must be non-decreasing");
    }
    if (index < 0 || index >= trace.meta.frame_count) {
      throw Error(ErrorKind::kValidation,
                  "line " + std::to_string(line_no) + ": frame index out of range");
    }
    last_index = index;
    seen[static_cast<std::size_t>(index)] = true;
    if (tok.size() == 1) continue;
    ObjectDescriptor d;
    if (!detail::parse_number(tok[1], d.object_id) || !detail::parse_number(tok[2], d.label) ||
        !detail::parse_number(tok[3], d.box.x) || !detail::parse_number(tok[4], d.box.y) ||
        !detail::parse_number(tok[5], d.box.w) || !detail::parse_number(tok[6], d.box.h)) {
      detail::parse_fail(line_no, "malformed object record");
    }
    trace.frames[static_cast<std::size_t>(index)].push_back(d);
  }
  if (!have_meta) throw Error(ErrorKind::kParse, "missing meta header");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw Error(ErrorKind::kValidation, "gap: frame " + std::to_string(i) + " missing");
  }
  validate(trace);
  return trace;
}

inline GroundTruthTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open trace '" + path + "'");
  return parse_trace(in);
}

inline void write_trace(std::ostream& out, const GroundTruthTrace& trace) {
  out << "meta fps=" << format_real(trace.meta.fps) << " width=" << trace.meta.width
      << " height=" << trace.meta.height << " frames=" << trace.meta.frame_count << '\n';
  for (int i = 0; i < trace.frame_count(); ++i) {
    const auto& f = trace.frames[static_cast<std::size_t>(i)];
    if (f.empty()) {
      out << i << '\n';
      continue;
    }
    for (const auto& d : f) {
      out << i << ' ' << d.object_id << ' ' << d.label << ' ' << format_real(d.box.x) << ' '
          << format_real(d.box.y) << ' ' << format_real(d.box.w) << ' ' << format_real(d.box.h)
          << '\n';
    }
  }
}

inline void save_trace(const std::string& path, const GroundTruthTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write trace '" + path + "'");
  write_trace(out, trace);
}

// ---------------------------------------------------------------------------
// Synthetic traces

enum class MotionPattern { kLinearBounce, kCircular };

struct SynthConfig {
  int frame_count = 600;
  double fps = 10.0;
  int width = 1280;
  int height = 720;
  int object_count = 3;
  double speed = 0.1;  // frame widths per second
  double box_frac_min = 0.08;  // box width as a fraction of the frame width
  double box_frac_max = 0.16;
  MotionPattern pattern = MotionPattern::kLinearBounce;
  int label_count = 30;
};

inline GroundTruthTrace synth_trace(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.frame_count <= 0 || cfg.object_count <= 0 || cfg.width <= 0 || cfg.height <= 0 ||
      cfg.label_count <= 0 || !(cfg.fps > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "synthetic trace counts and sizes must be positive");
  }
  if (!(cfg.speed >= 0.0) || !std::isfinite(cfg.speed)) {
    throw Error(ErrorKind::kInvalidConfig, "speed must be finite and non-negative");
  }
  if (!(cfg.box_frac_min > 0.0) || cfg.box_frac_max < cfg.box_frac_min || cfg.box_frac_max > 0.5) {
    throw Error(ErrorKind::kInvalidConfig, "box fraction range must lie in (0, 0.5]");
  }

  Rng rng(seed);
  GroundTruthTrace trace;
  trace.meta = {cfg.fps, cfg.width, cfg.height, cfg.frame_count};
  trace.frames.assign(static_cast<std::size_t>(cfg.frame_count), {});

  const double width = cfg.width;
  const double height = cfg.height;
  const double step_px = cfg.speed * width / cfg.fps;

  for (int id = 0; id < cfg.object_count; ++id) {
    const double w = rng.uniform(cfg.box_frac_min, cfg.box_frac_max) * width;
    const double h = std::min(w * rng.uniform(0.6, 1.4), 0.5 * height);
    const int label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.label_count)));

    if (cfg.pattern == MotionPattern::kLinearBounce) {
      const double lo_x = 0.5 * w, hi_x = width - 0.5 * w;
      const double lo_y = 0.5 * h, hi_y = height - 0.5 * h;
      double cx = rng.uniform(lo_x, hi_x);
      double cy = rng.uniform(lo_y, hi_y);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double vx = step_px * std::cos(theta);
      double vy = step_px * std::sin(theta);
      auto reflect = [](double& p, double& v, double lo, double hi) {
        if (p < lo) {
          p = 2.0 * lo - p;
          v = -v;
        } else if (p > hi) {
          p = 2.0 * hi - p;
          v = -v;
        }
      };
      for (int f = 0; f < cfg.frame_count; ++f) {
        trace.frames[static_cast<std::size_t>(f)].push_back(
            {id, label, BoundingBox::centered({cx, cy}, w, h)});
        cx += vx;
        cy += vy;
        reflect(cx, vx, lo_x, hi_x);
        reflect(cy, vy, lo_y, hi_y);
      }
    } else {
      const double half_span = 0.5 * std::min(width - w, height - h);
      const double radius = std::min(rng.uniform(0.1, 0.2) * std::min(width, height),
                                     std::max(half_span, 1.0));
      const double ox = rng.uniform(radius + 0.5 * w, std::max(radius + 0.5 * w, width - radius - 0.5 * w));
      const double oy = rng.uniform(radius + 0.5 * h, std::max(radius + 0.5 * h, height - radius - 0.5 * h));
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double omega = direction * step_px / radius;  // radians per frame
      for (int f = 0; f < cfg.frame_count; ++f) {
        const double a = phase + omega * f;
        trace.frames[static_cast<std::size_t>(f)].push_back(
            {id, label,
             BoundingBox::centered({ox + radius * std::cos(a), oy + radius * std::sin(a)}, w, h)});
      }
    }
  }
  validate(trace);
  return trace;
}

// ---------------------------------------------------------------------------
// Motion statistics

enum class MotionClass { kSlow, kFast, kFastest };

inline constexpr double kSlowMotionLimit = 0.05;
inline constexpr double kFastMotionLimit = 0.20;

inline std::string_view to_string(MotionClass c) {
  switch (c) {
    case MotionClass::kSlow: return "slow";
    case MotionClass::kFast: return "fast";
    case MotionClass::kFastest: return "fastest";
  }
  return "?";
}

struct MotionStat {
  double value = 0.0;
  bool empty = false;  // no object persisted across any consecutive pair
};

// Mean per-second center displacement over [from_frame, to_frame], in frame
// widths. Each consecutive pair contributes the mean over objects present in
// both frames; pairs with no shared object are skipped.
inline MotionStat motion_stat(const GroundTruthTrace& trace, int from_frame, int to_frame) {
  if (from_frame < 0 || to_frame >= trace.frame_count() || from_frame >= to_frame) {
    throw Error(ErrorKind::kFrameOutOfRange, "motion window [" + std::to_string(from_frame) +
                                                 ", " + std::to_string(to_frame) + "]");
  }
  double total = 0.0;
  int pairs = 0;
  for (int i = from_frame; i < to_frame; ++i) {
    double pair_sum = 0.0;
    int matched = 0;
    for (const auto& d : trace.frame(i)) {
      if (const auto* next = trace.find(i + 1, d.object_id)) {
        pair_sum += (next->box.center() - d.box.center()).norm();
        ++matched;
      }
    }
    if (matched > 0) {
      total += pair_sum / matched;
      ++pairs;
    }
  }
  if (pairs == 0) return {0.0, true};
  return {total / pairs * trace.meta.fps / trace.meta.width, false};
}

inline MotionClass classify_motion(double stat) {
  if (stat < kSlowMotionLimit) return MotionClass::kSlow;
  if (stat < kFastMotionLimit) return MotionClass::kFast;
  return MotionClass::kFastest;
}

}  // namespace edgetrack
