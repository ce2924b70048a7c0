// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_MASK_H_
#define ATTREFINE_MASK_H_

#include <cstdint>
#include <span>
#include <vector>

#include "attrefine/geometry.h"

namespace attrefine {

struct Run {
  std::int64_t start = 0;
  std::int64_t length = 0;

  friend bool operator==(const Run&, const Run&) = default;
};

// Binary foreground mask stored as row-major runs. Runs are kept canonical:
// sorted, non-empty, non-overlapping and non-adjacent, so two masks with the
// same pixel set compare equal.
class BinaryMask {
 public:
  BinaryMask() = default;
  // All-background mask.
  BinaryMask(int width, int height);

  // Validates ordering and bounds; adjacent runs are merged.
  static BinaryMask FromRuns(int width, int height, std::vector<Run> runs);
  // Nonzero bytes are foreground.
  static BinaryMask FromDense(int width, int height,
                              std::span<const std::uint8_t> pixels);
  // Every pixel of `region` set.
  static BinaryMask FromBox(int width, int height, const BBox& region);

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Run>& runs() const { return runs_; }

  bool Empty() const { return runs_.empty(); }
  std::int64_t Count() const;
  bool Get(int x, int y) const;
  std::vector<std::uint8_t> ToDense() const;

  // Pixel-wise AND / OR with a same-sized mask.
  BinaryMask And(const BinaryMask& other) const;
  BinaryMask Or(const BinaryMask& other) const;

  // Places this mask at (dx, dy) inside a width x height canvas; pixels
  // falling outside the canvas are dropped.
  BinaryMask PlacedIn(int width, int height, int dx, int dy) const;
  // Keeps only pixels inside `region`.
  BinaryMask ClippedTo(const BBox& region) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Run> runs_;
};

// Tightest half-open box around the foreground. Throws kEmptyMask.
BBox MaskBBox(const BinaryMask& mask);

// Foreground pixels with at least one 4-neighbour in the background or on the
// raster border.
BinaryMask MaskBoundary(const BinaryMask& mask);

}  // namespace attrefine

#endif  // ATTREFINE_MASK_H_
