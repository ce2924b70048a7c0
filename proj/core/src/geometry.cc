// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/geometry.h"

#include <cmath>
#include <sstream>

#include "attrefine/error.h"

namespace attrefine {

BBox BBox::Make(int x_min, int y_min, int x_max, int y_max) {
  BBox box{x_min, y_min, x_max, y_max};
  if (!box.Valid()) {
    std::ostringstream os;
    os << "degenerate box " << box;
    Fail(ErrorCode::kInvalidArgument, os.str());
  }
  return box;
}

std::ostream& operator<<(std::ostream& os, const BBox& box) {
  return os << "BBox(" << box.x_min << "," << box.y_min << "," << box.x_max
            << "," << box.y_max << ")";
}

std::optional<BBox> Intersect(const BBox& a, const BBox& b) {
  BBox r{std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min),
         std::min(a.x_max, b.x_max), std::min(a.y_max, b.y_max)};
  if (!r.Valid()) return std::nullopt;
  return r;
}

std::optional<BBox> ClipToImage(const BBox& box, int width, int height) {
  return Intersect(box, BBox{0, 0, width, height});
}

BBox ScaleAboutCenter(const BBox& box, double factor, int width, int height) {
  const double half_w = 0.5 * factor * box.Width();
  const double half_h = 0.5 * factor * box.Height();
  BBox scaled{static_cast<int>(std::floor(box.CenterX() - half_w)),
              static_cast<int>(std::floor(box.CenterY() - half_h)),
              static_cast<int>(std::ceil(box.CenterX() + half_w)),
              static_cast<int>(std::ceil(box.CenterY() + half_h))};
  auto clipped = ClipToImage(scaled, width, height);
  return clipped ? *clipped : box;
}

double BoxIou(const BBox& a, const BBox& b) {
  const auto inter = Intersect(a, b);
  if (!inter) return 0.0;
  const double i = static_cast<double>(inter->Area());
  const double u = static_cast<double>(a.Area() + b.Area()) - i;
  return u > 0.0 ? i / u : 0.0;
}

}  // namespace attrefine
