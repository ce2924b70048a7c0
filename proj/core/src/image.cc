// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/image.h"

#include <cmath>
#include <string>

#include "attrefine/error.h"

namespace attrefine {

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) {
    Fail(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    Fail(ErrorCode::kShapeMismatch,
         "image data has " + std::to_string(data_.size()) +
             " values, expected " + std::to_string(width * height));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) Fail(ErrorCode::kNonFiniteValue, "image pixel");
    if (v < 0.0 || v > 1.0) {
      Fail(ErrorCode::kInvalidArgument,
           "image intensity outside [0,1]: " + std::to_string(v));
    }
  }
}

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(static_cast<std::size_t>(
                                        std::max(width, 0)) *
                                        std::max(height, 0),
                                    fill)) {}

GrayImage GrayImage::Crop(const BBox& window) const {
  if (!window.InsideImage(width_, height_)) {
    Fail(ErrorCode::kBoxOutOfBounds, "crop window outside image");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(window.Area()));
  for (int y = window.y_min; y < window.y_max; ++y) {
    const double* row = &data_[static_cast<std::size_t>(y) * width_];
    out.insert(out.end(), row + window.x_min, row + window.x_max);
  }
  return GrayImage(window.Width(), window.Height(), std::move(out));
}

GrayImage GaussianBlur(const GrayImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int w = image.width();
  const int h = image.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  std::vector<double> out(tmp.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * image.at(std::clamp(x + i, 0, w - 1), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] *
               tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w +
                   x];
      }
      out[static_cast<std::size_t>(y) * w + x] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return GrayImage(w, h, std::move(out));
}

}  // namespace attrefine
