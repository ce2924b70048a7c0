// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/tensor.h"

#include <cmath>
#include <string>

#include "attrefine/error.h"

namespace attrefine {

std::int64_t ShapeProduct(std::span<const std::int64_t> shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) Fail(ErrorCode::kShapeMismatch, "negative tensor extent");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::int64_t expected = ShapeProduct(shape_);
  if (expected != static_cast<std::int64_t>(data_.size())) {
    Fail(ErrorCode::kShapeMismatch,
         "tensor shape holds " + std::to_string(expected) + " values, got " +
             std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      Fail(ErrorCode::kNonFiniteValue,
           "tensor value at flat index " + std::to_string(i));
    }
  }
}

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)),
      data_(static_cast<std::size_t>(ShapeProduct(shape_)), 0.0f) {}

}  // namespace attrefine
