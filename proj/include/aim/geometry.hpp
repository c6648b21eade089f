// Microphone array layout and axis-aligned obstacle geometry.
#pragma once

#include "aim/core.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace aim {

struct ArrayGeometry {
  std::string id;
  Vec3 origin = Vec3::Zero();
  std::vector<Vec2> element_offsets;  // planar, in the array frame
  double orientation = 0.0;           // rotation of the array frame about +z
  double clock_offset = 0.0;          // local clock minus true time, seconds

  std::size_t size() const { return element_offsets.size(); }

  Vec3 element_position(std::size_t i) const {
    const Vec2& o = element_offsets.at(i);
    double c = std::cos(orientation), s = std::sin(orientation);
    return origin + Vec3(c * o.x() - s * o.y(), s * o.x() + c * o.y(), 0.0);
  }

  /// Element offset rotated into the world frame (z = 0).
  Vec3 element_offset_world(std::size_t i) const { return element_position(i) - origin; }

  double max_spacing() const {
    double d = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j) d = std::max(d, (element_offsets[i] - element_offsets[j]).norm());
    return d;
  }
};

/// Circular array of `count` elements, numbered counter-clockwise from the +x axis.
inline ArrayGeometry circular_array(std::string id, Vec3 origin, int count, double radius, double orientation = 0.0) {
  ArrayGeometry g;
  g.id = std::move(id);
  g.origin = origin;
  g.orientation = orientation;
  for (int i = 0; i < count; ++i) {
    double a = 2.0 * kPi * i / count;
    g.element_offsets.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return g;
}

/// Six-element circular array with 5 cm between neighbours.
inline ArrayGeometry six_mic_array(std::string id, Vec3 origin) { return circular_array(std::move(id), origin, 6, 0.05); }

/// Four-element square array with 6.5 cm sides.
inline ArrayGeometry four_mic_array(std::string id, Vec3 origin) {
  return circular_array(std::move(id), origin, 4, 0.065 / std::sqrt(2.0), kPi / 4.0);
}

inline void validate(const ArrayGeometry& g) {
  if (g.size() != 4 && g.size() != 6)
    fail(ErrorCode::InvalidInput, "array '" + g.id + "': element count must be 4 or 6");
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j)
      if ((g.element_offsets[i] - g.element_offsets[j]).norm() <= 0.0)
        fail(ErrorCode::InvalidInput, "array '" + g.id + "': coincident elements");
}

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// True when the open segment a-b passes through the box (slab test).
inline bool segment_hits_box(const Vec3& a, const Vec3& b, const Box& box) {
  Vec3 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-12) {
      if (a[k] < box.lo[k] || a[k] > box.hi[k]) return false;
      continue;
    }
    double ta = (box.lo[k] - a[k]) / d[k];
    double tb = (box.hi[k] - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

/// Index of the first obstacle nearest to `from` that blocks the segment, or -1.
inline int blocking_obstacle(const Vec3& from, const Vec3& to, const std::vector<Box>& boxes) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!segment_hits_box(from, to, boxes[i])) continue;
    Vec3 c = 0.5 * (boxes[i].lo + boxes[i].hi);
    double d = (c - from).norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Mirror image of `p` across the plane of the box face nearest to it (distance to the face
/// rectangle, not its plane).
inline Vec3 mirror_across_nearest_face(const Vec3& p, const Box& box) {
  double best = std::numeric_limits<double>::infinity();
  int axis = 0;
  double plane = 0.0;
  for (int k = 0; k < 3; ++k) {
    for (double f : {box.lo[k], box.hi[k]}) {
      Vec3 q = p.cwiseMax(box.lo).cwiseMin(box.hi);
      q[k] = f;
      double d = (p - q).norm();
      if (d < best) {
        best = d;
        axis = k;
        plane = f;
      }
    }
  }
  Vec3 m = p;
  m[axis] = 2.0 * plane - p[axis];
  return m;
}

}  // namespace aim
