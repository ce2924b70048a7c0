// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/mask.h"

#include <algorithm>
#include <string>

#include "attrefine/error.h"

namespace attrefine {
namespace {

void CheckDims(int width, int height) {
  if (width <= 0 || height <= 0) {
    Fail(ErrorCode::kInvalidArgument, "mask dimensions must be positive");
  }
}

void RequireSameShape(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    Fail(ErrorCode::kShapeMismatch, "mask dimensions differ");
  }
}

// Appends [start, start+length), merging with the previous run if touching.
void AppendRun(std::vector<Run>& runs, std::int64_t start,
               std::int64_t length) {
  if (length <= 0) return;
  if (!runs.empty() && runs.back().start + runs.back().length == start) {
    runs.back().length += length;
  } else {
    runs.push_back({start, length});
  }
}

}  // namespace

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  CheckDims(width, height);
}

BinaryMask BinaryMask::FromRuns(int width, int height, std::vector<Run> runs) {
  BinaryMask mask(width, height);
  const std::int64_t total = std::int64_t{width} * height;
  std::int64_t cursor = 0;
  for (const Run& r : runs) {
    if (r.length <= 0) {
      Fail(ErrorCode::kInvalidArgument, "mask run with non-positive length");
    }
    if (r.start < cursor) {
      Fail(ErrorCode::kInvalidArgument,
           "mask runs unsorted or overlapping at start " +
               std::to_string(r.start));
    }
    if (r.start + r.length > total) {
      Fail(ErrorCode::kInvalidArgument, "mask run exceeds raster");
    }
    AppendRun(mask.runs_, r.start, r.length);
    cursor = r.start + r.length;
  }
  return mask;
}

BinaryMask BinaryMask::FromDense(int width, int height,
                                 std::span<const std::uint8_t> pixels) {
  BinaryMask mask(width, height);
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    Fail(ErrorCode::kShapeMismatch, "dense mask size mismatch");
  }
  const std::int64_t n = static_cast<std::int64_t>(pixels.size());
  std::int64_t i = 0;
  while (i < n) {
    if (!pixels[i]) {
      ++i;
      continue;
    }
    const std::int64_t start = i;
    while (i < n && pixels[i]) ++i;
    mask.runs_.push_back({start, i - start});
  }
  return mask;
}

BinaryMask BinaryMask::FromBox(int width, int height, const BBox& region) {
  BinaryMask mask(width, height);
  const auto clipped = ClipToImage(region, width, height);
  if (!clipped) return mask;
  for (int y = clipped->y_min; y < clipped->y_max; ++y) {
    AppendRun(mask.runs_, std::int64_t{y} * width + clipped->x_min,
              clipped->Width());
  }
  return mask;
}

std::int64_t BinaryMask::Count() const {
  std::int64_t n = 0;
  for (const Run& r : runs_) n += r.length;
  return n;
}

bool BinaryMask::Get(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
  const std::int64_t idx = std::int64_t{y} * width_ + x;
  auto it = std::upper_bound(
      runs_.begin(), runs_.end(), idx,
      [](std::int64_t v, const Run& r) { return v < r.start; });
  if (it == runs_.begin()) return false;
  --it;
  return idx < it->start + it->length;
}

std::vector<std::uint8_t> BinaryMask::ToDense() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width_) * height_, 0);
  for (const Run& r : runs_) {
    std::fill_n(out.begin() + r.start, r.length, std::uint8_t{1});
  }
  return out;
}

BinaryMask BinaryMask::And(const BinaryMask& other) const {
  RequireSameShape(*this, other);
  BinaryMask out(width_, height_);
  auto a = runs_.begin();
  auto b = other.runs_.begin();
  while (a != runs_.end() && b != other.runs_.end()) {
    const std::int64_t lo = std::max(a->start, b->start);
    const std::int64_t hi =
        std::min(a->start + a->length, b->start + b->length);
    AppendRun(out.runs_, lo, hi - lo);
    if (a->start + a->length < b->start + b->length) {
      ++a;
    } else {
      ++b;
    }
  }
  return out;
}

BinaryMask BinaryMask::Or(const BinaryMask& other) const {
  RequireSameShape(*this, other);
  std::vector<Run> merged;
  merged.reserve(runs_.size() + other.runs_.size());
  std::merge(runs_.begin(), runs_.end(), other.runs_.begin(),
             other.runs_.end(), std::back_inserter(merged),
             [](const Run& x, const Run& y) { return x.start < y.start; });
  BinaryMask out(width_, height_);
  for (const Run& r : merged) {
    if (!out.runs_.empty()) {
      Run& last = out.runs_.back();
      const std::int64_t last_end = last.start + last.length;
      if (r.start <= last_end) {
        last.length = std::max(last_end, r.start + r.length) - last.start;
        continue;
      }
    }
    out.runs_.push_back(r);
  }
  return out;
}

BinaryMask BinaryMask::PlacedIn(int width, int height, int dx, int dy) const {
  BinaryMask out(width, height);
  for (const Run& r : runs_) {
    // Runs may wrap across rows; split them per row.
    std::int64_t pos = r.start;
    const std::int64_t end = r.start + r.length;
    while (pos < end) {
      const int y = static_cast<int>(pos / width_);
      const int x0 = static_cast<int>(pos % width_);
      const std::int64_t row_end =
          std::min<std::int64_t>(end, std::int64_t{y + 1} * width_);
      const int x1 = x0 + static_cast<int>(row_end - pos);
      const int ty = y + dy;
      if (ty >= 0 && ty < height) {
        const int tx0 = std::max(x0 + dx, 0);
        const int tx1 = std::min(x1 + dx, width);
        if (tx0 < tx1) {
          AppendRun(out.runs_, std::int64_t{ty} * width + tx0, tx1 - tx0);
        }
      }
      pos = row_end;
    }
  }
  return out;
}

BinaryMask BinaryMask::ClippedTo(const BBox& region) const {
  return And(FromBox(width_, height_, region));
}

BBox MaskBBox(const BinaryMask& mask) {
  if (mask.Empty()) Fail(ErrorCode::kEmptyMask, "mask has no foreground");
  const int w = mask.width();
  BBox box{w, mask.height(), -1, -1};
  for (const Run& r : mask.runs()) {
    const std::int64_t last = r.start + r.length - 1;
    const int y0 = static_cast<int>(r.start / w);
    const int y1 = static_cast<int>(last / w);
    box.y_min = std::min(box.y_min, y0);
    box.y_max = std::max(box.y_max, y1 + 1);
    if (y0 == y1) {
      box.x_min = std::min(box.x_min, static_cast<int>(r.start % w));
      box.x_max = std::max(box.x_max, static_cast<int>(last % w) + 1);
    } else {
      // A run wrapping a row boundary touches both column 0 and column w-1.
      box.x_min = 0;
      box.x_max = w;
    }
  }
  return box;
}

BinaryMask MaskBoundary(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  const auto dense = mask.ToDense();
  std::vector<std::uint8_t> edge(dense.size(), 0);
  auto fg = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h &&
           dense[static_cast<std::size_t>(y) * w + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(x, y)) continue;
      if (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1)) {
        edge[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }
  return BinaryMask::FromDense(w, h, edge);
}

}  // namespace attrefine
