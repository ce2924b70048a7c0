// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_ATTRIBUTION_H_
#define ATTREFINE_ATTRIBUTION_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attrefine/geometry.h"
#include "attrefine/image.h"
#include "attrefine/tensor.h"
#include "attrefine/toy_scorer.h"

namespace attrefine {

enum class AttributionMethod { kIntegratedGradients, kGradCam, kExternal };

std::string_view AttributionMethodName(AttributionMethod method);
AttributionMethod ParseAttributionMethod(std::string_view name);

// Per-instance attribution raster [H, W]; zero outside `box`.
struct AttributionMap {
  int instance_id = 0;
  BBox box;
  Tensor values;
  AttributionMethod method = AttributionMethod::kIntegratedGradients;

  int width() const { return static_cast<int>(values.shape()[1]); }
  int height() const { return static_cast<int>(values.shape()[0]); }
};

struct AttributionPoint {
  int x = 0;
  int y = 0;
  double value = 0.0;
  int rank = 0;  // 1-based, by descending |value|

  friend bool operator==(const AttributionPoint&,
                         const AttributionPoint&) = default;
};

enum class BaselineKind { kZeros, kBlur };

// All-zero image, or a Gaussian blur of the input.
GrayImage MakeBaseline(const GrayImage& image, BaselineKind kind,
                       double blur_sigma);

// Midpoint-rule Integrated Gradients along the straight path from `baseline`
// to `image`:
//   IG_i = (I_i - I'_i) * (1/n) * sum_{t=1..n} dS/dI_i(I' + (t-0.5)/n (I-I'))
// restricted to the detection box.
AttributionMap IntegratedGradients(const ToyScorer& scorer,
                                   const GrayImage& image,
                                   const GrayImage& baseline,
                                   const Detection& det, int n_steps);

// Box-restricted Grad-CAM from one scorer trace: channel weights are the
// footprint-mean feature gradients, the weighted feature sum is rectified,
// bilinearly upsampled to image resolution and zeroed outside the box.
AttributionMap GradCam(const ScorerTrace& trace, const Detection& det,
                       int image_width, int image_height);

// Bilinear sample of a [fh, fw] plane at image pixel (x, y) where feature cell
// (i, j) sits on pixel (stride*j, stride*i); coordinates clamp at the grid
// edge.
double BilinearAt(std::span<const double> plane, int fw, int fh, int stride,
                  int x, int y);

// Greedy non-maximum suppression on |value| inside the box. Candidates are
// visited by descending |value|, ties broken by (y, x); a candidate is skipped
// if it lies within Chebyshev distance `min_separation` of an accepted point
// (for min_separation = 0 only the pixel itself is excluded).
std::vector<AttributionPoint> ExtractPoints(const AttributionMap& map,
                                            int top_k, int min_separation);

// SODT [H, W] raster produced elsewhere; zeroed outside the box and passed
// through otherwise (no rectification).
AttributionMap LoadExternalMap(const std::filesystem::path& path,
                               const Detection& det, int image_width,
                               int image_height);
AttributionMap ExternalMapFromTensor(Tensor tensor, const Detection& det,
                                     int image_width, int image_height);

// [{"x":..,"y":..,"value":..,"rank":..}, ...]
std::string PointsToJson(const std::vector<AttributionPoint>& points);
std::vector<AttributionPoint> PointsFromJson(std::string_view text);

// Sum of |v| over the whole raster and over pixels outside `region`.
struct MapEnergy {
  double total = 0.0;
  double outside = 0.0;
  double OutsideFraction() const { return total > 0.0 ? outside / total : 0.0; }
};
MapEnergy ComputeEnergy(const AttributionMap& map, const BBox& region);

}  // namespace attrefine

#endif  // ATTREFINE_ATTRIBUTION_H_
