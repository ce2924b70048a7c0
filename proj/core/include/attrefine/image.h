// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_IMAGE_H_
#define ATTREFINE_IMAGE_H_

#include <cstddef>
#include <span>
#include <vector>

#include "attrefine/geometry.h"

namespace attrefine {

// Row-major grayscale raster with intensities in [0, 1]. Immutable once
// built; the constructor validates size and range.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::vector<double> data);
  // Constant-filled image.
  GrayImage(int width, int height, double fill);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::span<const double> data() const { return data_; }

  double at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  BBox Bounds() const { return {0, 0, width_, height_}; }
  bool SameShape(const GrayImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  // Copies the pixels of `window` (must lie inside the image).
  GrayImage Crop(const BBox& window) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Separable Gaussian blur with edge clamping; used for blurred IG baselines.
GrayImage GaussianBlur(const GrayImage& image, double sigma);

}  // namespace attrefine

#endif  // ATTREFINE_IMAGE_H_
