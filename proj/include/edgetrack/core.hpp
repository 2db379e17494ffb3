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
#include <vector>

#include "edgetrack/error.hpp"

namespace edgetrack {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(Vec2, Vec2) = default;
  double norm() const { return std::hypot(x, y); }
};

// Axis-aligned box in continuous pixel coordinates; (x, y) is the top-left
// corner. May extend past the frame, but w and h stay positive.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  bool valid() const { return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y); }
  double area() const { return w * h; }
  Vec2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  double diagonal() const { return std::hypot(w, h); }

  static BoundingBox centered(Vec2 c, double w, double h) {
    return {c.x - 0.5 * w, c.y - 0.5 * h, w, h};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ObjectDescriptor {
  int object_id = 0;
  int label = 0;
  BoundingBox box;

  friend bool operator==(const ObjectDescriptor&, const ObjectDescriptor&) = default;
};

struct FrameMeta {
  int index = 0;
  double timestamp = 0.0;
  int width = 0;
  int height = 0;
  long encoded_size = 0;

  static FrameMeta at(int index, double fps, int width, int height, long encoded_size = 0) {
    return {index, index / fps, width, height, encoded_size};
  }
};

inline constexpr double kDefaultIouThreshold = 0.5;

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

// Fraction of ground-truth objects recalled: an object counts when a
// prediction carrying the same identity and label overlaps it with IoU
// strictly above `threshold`.
inline double frame_recall(std::span<const ObjectDescriptor> truth,
                           std::span<const ObjectDescriptor> pred,
                           double threshold = kDefaultIouThreshold) {
  if (truth.empty()) throw Error(ErrorKind::kEmptyTruth, "frame has no ground-truth objects");
  int recalled = 0;
  for (const auto& t : truth) {
    for (const auto& p : pred) {
      if (p.object_id == t.object_id && p.label == t.label) {
        if (iou(t.box, p.box) > threshold) ++recalled;
        break;
      }
    }
  }
  return static_cast<double>(recalled) / static_cast<double>(truth.size());
}

inline double mar(std::span<const double> per_frame_recalls) {
  if (per_frame_recalls.empty()) throw Error(ErrorKind::kEmptyList, "no recalls to average");
  double sum = 0.0;
  for (double r : per_frame_recalls) sum += r;
  return sum / static_cast<double>(per_frame_recalls.size());
}

}  // namespace edgetrack
