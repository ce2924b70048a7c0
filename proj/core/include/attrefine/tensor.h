// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_TENSOR_H_
#define ATTREFINE_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace attrefine {

// Dense row-major float32 tensor. Values must be finite.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::int64_t> shape, std::vector<float> data);
  // Zero-filled.
  explicit Tensor(std::vector<std::int64_t> shape);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }
  std::size_t size() const { return data_.size(); }
  int rank() const { return static_cast<int>(shape_.size()); }

  // 2-D and 3-D row-major accessors; no bounds checks.
  float at(std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>(y * shape_[1] + x)];
  }
  float& at(std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(y * shape_[1] + x)];
  }
  float at(std::int64_t k, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>((k * shape_[1] + y) * shape_[2] + x)];
  }
  float& at(std::int64_t k, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>((k * shape_[1] + y) * shape_[2] + x)];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<float> data_;
};

std::int64_t ShapeProduct(std::span<const std::int64_t> shape);

}  // namespace attrefine

#endif  // ATTREFINE_TENSOR_H_
