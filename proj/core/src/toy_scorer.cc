// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/toy_scorer.h"

#include <cmath>
#include <sstream>

#include "attrefine/error.h"

namespace attrefine {
namespace {

int CeilDiv(int a, int b) { return (a + b - 1) / b; }

}  // namespace

KernelKind ParseKernelKind(std::string_view name) {
  if (name == "identity") return KernelKind::kIdentity;
  if (name == "gaussian") return KernelKind::kGaussian;
  if (name == "laplacian") return KernelKind::kLaplacian;
  if (name == "box" || name == "box_mean") return KernelKind::kBoxMean;
  Fail(ErrorCode::kConfigInvalid, "unknown kernel '" + std::string(name) + "'");
}

std::string_view KernelKindName(KernelKind kind) {
  switch (kind) {
    case KernelKind::kIdentity: return "identity";
    case KernelKind::kGaussian: return "gaussian";
    case KernelKind::kLaplacian: return "laplacian";
    case KernelKind::kBoxMean: return "box";
  }
  return "?";
}

Kernel3x3 KernelTaps(KernelKind kind) {
  switch (kind) {
    case KernelKind::kIdentity:
      return {0, 0, 0, 0, 1, 0, 0, 0, 0};
    case KernelKind::kGaussian:
      return {1 / 16.0, 2 / 16.0, 1 / 16.0, 2 / 16.0, 4 / 16.0,
              2 / 16.0, 1 / 16.0, 2 / 16.0, 1 / 16.0};
    case KernelKind::kLaplacian:
      return {0, 1, 0, 1, -4, 1, 0, 1, 0};
    case KernelKind::kBoxMean: {
      Kernel3x3 k;
      k.fill(1.0 / 9.0);
      return k;
    }
  }
  return {};
}

ToyScorer::ToyScorer(ToyScorerOptions options) : options_(std::move(options)) {
  if (options_.kernels.empty()) {
    Fail(ErrorCode::kConfigInvalid, "scorer needs at least one kernel");
  }
  if (options_.kernels.size() != options_.weights.size()) {
    Fail(ErrorCode::kConfigInvalid, "one mixing weight per kernel required");
  }
  if (options_.stride < 1) {
    Fail(ErrorCode::kConfigInvalid, "scorer stride must be >= 1");
  }
  for (double w : options_.weights) {
    if (!std::isfinite(w)) Fail(ErrorCode::kConfigInvalid, "non-finite weight");
  }
  if (!std::isfinite(options_.bias)) {
    Fail(ErrorCode::kConfigInvalid, "non-finite bias");
  }
  for (KernelKind k : options_.kernels) taps_.push_back(KernelTaps(k));
}

BBox ToyScorer::Footprint(const BBox& box, int width, int height) const {
  const int s = options_.stride;
  const int fw = width / s;
  const int fh = height / s;
  BBox fp{CeilDiv(box.x_min, s), CeilDiv(box.y_min, s),
          std::min(CeilDiv(box.x_max, s), fw),
          std::min(CeilDiv(box.y_max, s), fh)};
  if (!fp.Valid()) {
    std::ostringstream os;
    os << box << " has no feature cells at stride " << s;
    Fail(ErrorCode::kBoxSmallerThanStride, os.str());
  }
  return fp;
}

BBox ToyScorer::ReceptiveField(const BBox& box, int width, int height) const {
  const BBox fp = Footprint(box, width, height);
  const int s = options_.stride;
  const BBox field{s * fp.x_min - 1, s * fp.y_min - 1, s * (fp.x_max - 1) + 2,
                   s * (fp.y_max - 1) + 2};
  return *ClipToImage(field, width, height);
}

ScorerTrace ToyScorer::Score(const GrayImage& image, const BBox& box) const {
  return Score(image.data(), image.width(), image.height(), box);
}

ScorerTrace ToyScorer::Score(std::span<const double> pixels, int width,
                             int height, const BBox& box) const {
  if (!box.InsideImage(width, height)) {
    std::ostringstream os;
    os << box << " outside " << width << "x" << height << " image";
    Fail(ErrorCode::kBoxOutOfBounds, os.str());
  }
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    Fail(ErrorCode::kShapeMismatch, "raster size does not match dimensions");
  }
  const int s = options_.stride;
  const int fw = width / s;
  const int fh = height / s;
  const int num_k = num_kernels();
  const BBox fp = Footprint(box, width, height);
  const bool relu = options_.activation == Activation::kRelu;

  auto pixel = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= width || y >= height) return 0.0;
    return pixels[static_cast<std::size_t>(y) * width + x];
  };

  // Forward. Pre-activations are kept in double for the backward pass.
  std::vector<double> pre(static_cast<std::size_t>(num_k) * fh * fw);
  std::vector<double> act(pre.size());
  for (int k = 0; k < num_k; ++k) {
    const Kernel3x3& taps = taps_[k];
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            acc += taps[(dy + 1) * 3 + (dx + 1)] * pixel(s * j + dx, s * i + dy);
          }
        }
        const std::size_t idx = (static_cast<std::size_t>(k) * fh + i) * fw + j;
        pre[idx] = acc;
        act[idx] = relu ? std::max(acc, 0.0) : acc;
      }
    }
  }

  const double z_count = static_cast<double>(fp.Area());
  double logit = options_.bias;
  for (int k = 0; k < num_k; ++k) {
    double pooled = 0.0;
    for (int i = fp.y_min; i < fp.y_max; ++i) {
      for (int j = fp.x_min; j < fp.x_max; ++j) {
        pooled += act[(static_cast<std::size_t>(k) * fh + i) * fw + j];
      }
    }
    logit += options_.weights[k] * (pooled / z_count);
  }

  double score;
  double dscore_dlogit;
  if (options_.head == Head::kSigmoid) {
    score = 1.0 / (1.0 + std::exp(-logit));
    dscore_dlogit = score * (1.0 - score);
  } else {
    score = logit;
    dscore_dlogit = 1.0;
  }

  // Backward.
  ScorerTrace trace;
  trace.logit = logit;
  trace.score = score;
  trace.stride = s;
  trace.footprint = fp;
  trace.features = Tensor({num_k, fh, fw});
  trace.feature_grads = Tensor({num_k, fh, fw});
  trace.input_grad = Tensor({height, width});

  std::vector<double> input_grad(static_cast<std::size_t>(width) * height, 0.0);
  for (int k = 0; k < num_k; ++k) {
    const double cell_grad = dscore_dlogit * options_.weights[k] / z_count;
    const Kernel3x3& taps = taps_[k];
    for (int i = 0; i < fh; ++i) {
      for (int j = 0; j < fw; ++j) {
        const std::size_t idx = (static_cast<std::size_t>(k) * fh + i) * fw + j;
        trace.features.at(k, i, j) = static_cast<float>(act[idx]);
        if (!fp.Contains(j, i)) continue;
        trace.feature_grads.at(k, i, j) = static_cast<float>(cell_grad);
        // ReLU'(0) is taken as 0.
        if (relu && pre[idx] <= 0.0) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          const int y = s * i + dy;
          if (y < 0 || y >= height) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = s * j + dx;
            if (x < 0 || x >= width) continue;
            input_grad[static_cast<std::size_t>(y) * width + x] +=
                cell_grad * taps[(dy + 1) * 3 + (dx + 1)];
          }
        }
      }
    }
  }
  auto out = trace.input_grad.mutable_data();
  for (std::size_t i = 0; i < input_grad.size(); ++i) {
    out[i] = static_cast<float>(input_grad[i]);
  }
  return trace;
}

}  // namespace attrefine
