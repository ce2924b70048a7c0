// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_GEOMETRY_H_
#define ATTREFINE_GEOMETRY_H_

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <ostream>

namespace attrefine {

struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned box over the half-open pixel ranges [x_min, x_max) x
// [y_min, y_max). Area is the pixel count.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  // Throws kInvalidArgument unless x_min < x_max and y_min < y_max.
  static BBox Make(int x_min, int y_min, int x_max, int y_max);

  bool Valid() const { return x_min < x_max && y_min < y_max; }
  int Width() const { return x_max - x_min; }
  int Height() const { return y_max - y_min; }
  std::int64_t Area() const {
    return Valid() ? std::int64_t{Width()} * Height() : 0;
  }
  bool Contains(int x, int y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
  bool Contains(Point p) const { return Contains(p.x, p.y); }
  bool Contains(const BBox& other) const {
    return other.x_min >= x_min && other.x_max <= x_max &&
           other.y_min >= y_min && other.y_max <= y_max;
  }
  bool InsideImage(int width, int height) const {
    return Valid() && x_min >= 0 && y_min >= 0 && x_max <= width &&
           y_max <= height;
  }
  double CenterX() const { return 0.5 * (x_min + x_max); }
  double CenterY() const { return 0.5 * (y_min + y_max); }

  BBox Translated(int dx, int dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

std::ostream& operator<<(std::ostream& os, const BBox& box);

// Intersection; nullopt when the boxes do not overlap.
std::optional<BBox> Intersect(const BBox& a, const BBox& b);

// Clips to [0, width) x [0, height); nullopt if nothing remains.
std::optional<BBox> ClipToImage(const BBox& box, int width, int height);

// Scales every side about the box center by `factor`, rounding outward, then
// clips to the image. The result always contains `box` when factor >= 1 and
// `box` lies inside the image.
BBox ScaleAboutCenter(const BBox& box, double factor, int width, int height);

// |a ∩ b| / |a ∪ b| in pixel counts; 0 when disjoint.
double BoxIou(const BBox& a, const BBox& b);

inline int ChebyshevDistance(Point a, Point b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

struct Detection {
  int instance_id = 0;
  BBox bbox;
  double confidence = 1.0;
  int class_id = 0;
};

}  // namespace attrefine

#endif  // ATTREFINE_GEOMETRY_H_
