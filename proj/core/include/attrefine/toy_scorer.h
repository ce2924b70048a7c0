// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_TOY_SCORER_H_
#define ATTREFINE_TOY_SCORER_H_

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrefine/geometry.h"
#include "attrefine/image.h"
#include "attrefine/tensor.h"

namespace attrefine {

enum class KernelKind { kIdentity, kGaussian, kLaplacian, kBoxMean };

KernelKind ParseKernelKind(std::string_view name);
std::string_view KernelKindName(KernelKind kind);

// 3x3 correlation taps, row-major, index (dy+1)*3 + (dx+1).
using Kernel3x3 = std::array<double, 9>;
Kernel3x3 KernelTaps(KernelKind kind);

enum class Activation { kRelu, kIdentity };
enum class Head { kSigmoid, kLinear };

struct ToyScorerOptions {
  std::vector<KernelKind> kernels = {KernelKind::kIdentity,
                                     KernelKind::kGaussian,
                                     KernelKind::kLaplacian,
                                     KernelKind::kBoxMean};
  std::vector<double> weights = {1.0, 1.5, 0.5, 1.0};
  int stride = 2;
  double bias = 0.0;
  // kIdentity/kLinear give a linear scorer; only meant for tests.
  Activation activation = Activation::kRelu;
  Head head = Head::kSigmoid;
};

// Everything one forward/backward pass produces. Feature tensors are
// [K, H/stride, W/stride]; input_grad is [H, W].
struct ScorerTrace {
  Tensor features;       // post-activation A^k
  Tensor feature_grads;  // dS/dA^k, zero outside the footprint
  Tensor input_grad;     // dS/dI
  double logit = 0.0;
  double score = 0.0;
  int stride = 1;
  BBox footprint;  // box cells at feature resolution
};

// Fixed convolutional confidence scorer with hand-written backprop:
// conv(K kernels, stride, zero padding) -> activation -> mean over the box
// footprint -> weighted sum + bias -> sigmoid.
// Feature cell (i, j) samples input pixel (stride*j, stride*i).
class ToyScorer {
 public:
  ToyScorer() : ToyScorer(ToyScorerOptions{}) {}
  explicit ToyScorer(ToyScorerOptions options);

  const ToyScorerOptions& options() const { return options_; }
  int stride() const { return options_.stride; }
  int num_kernels() const { return static_cast<int>(taps_.size()); }

  // Feature-grid cells whose sample pixel lies in `box`. Throws
  // kBoxSmallerThanStride if there are none.
  BBox Footprint(const BBox& box, int width, int height) const;
  // Input pixels that can influence the score for `box`.
  BBox ReceptiveField(const BBox& box, int width, int height) const;

  ScorerTrace Score(const GrayImage& image, const BBox& box) const;
  // Same pass over an unchecked raster; finite-difference probes may step
  // slightly outside [0, 1].
  ScorerTrace Score(std::span<const double> pixels, int width, int height,
                    const BBox& box) const;

 private:
  ToyScorerOptions options_;
  std::vector<Kernel3x3> taps_;
};

}  // namespace attrefine

#endif  // ATTREFINE_TOY_SCORER_H_
