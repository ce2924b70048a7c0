// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

// Mask-guided attribution refinement: jittered context crops around each
// detection, per-point segmentation in every crop, the intersection of those
// masks (the enhanced mask, EM), two quality metrics of the EM against the
// reference box, per-instance normalisation and a two-threshold gate that
// decides which attribution points keep their region of the map.

#ifndef ATTREFINE_REFINE_H_
#define ATTREFINE_REFINE_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attrefine/attribution.h"
#include "attrefine/geometry.h"
#include "attrefine/image.h"
#include "attrefine/mask.h"
#include "attrefine/segment.h"

namespace attrefine {

struct RefineConfig {
  int n_slices = 10;
  // Crop area as a multiple of the box area.
  double area_ratio = 20.0;
  double score_threshold = 0.4;
  double iou_threshold = 0.3;
  // Floor added to the MaskScore denominator.
  double epsilon = 1e-8;
  // Crop-center jitter as a fraction of the crop side (uniform in +/-).
  double jitter_fraction = 0.25;
  std::uint64_t master_seed = 0;

  // Throws kConfigInvalid.
  void Validate() const;
};

struct SliceWindow {
  BBox window;  // full-image coordinates
  int seed_index = 0;

  friend bool operator==(const SliceWindow&, const SliceWindow&) = default;
};

// Window `slice_index` for one instance. Its side lengths are
// ceil(side * sqrt(area_ratio)) (capped at the image), its center is the box
// center plus uniform jitter of +/- jitter_fraction of the window side, and it
// is then shifted the minimum amount needed to contain `box` and stay inside
// the image. The jitter draws come from a substream keyed by
// (master_seed, instance_id, slice_index) only.
SliceWindow SliceAt(int image_width, int image_height, const BBox& box,
                    double area_ratio, double jitter_fraction,
                    std::uint64_t master_seed, int instance_id,
                    int slice_index);

// Windows 0..n-1; a prefix of the list for n+1.
std::vector<SliceWindow> RandomSlices(int image_width, int image_height,
                                      const BBox& box, int n,
                                      double area_ratio,
                                      std::uint64_t master_seed,
                                      int instance_id,
                                      double jitter_fraction = 0.25);

// Pixel-wise intersection of the per-slice masks, each translated into the
// full image; pixels outside a slice's window are background for that slice.
// Throws kWindowMaskMismatch if a mask's size differs from its window.
BinaryMask EnhancedMask(
    int image_width, int image_height,
    std::span<const std::pair<SliceWindow, BinaryMask>> per_slice);

// IoU of the EM's tight box with `gt`; 0 for an empty EM.
double MaskIou(const BinaryMask& em, const BBox& gt);

// The pieces of the Fisher-style contrast score, kept for reporting.
struct MaskScoreTerms {
  double core_mean = 0.0;
  double core_var = 0.0;
  double bg_mean = 0.0;
  double bg_var = 0.0;
  std::int64_t core_count = 0;
  std::int64_t bg_count = 0;
  std::int64_t overflow = 0;
  double lambda = 0.0;
  bool bg_fallback = false;  // bg taken from the 1.25x annulus
  double score = 0.0;
};

// (mu_core - mu_bg)^2 / (var_core + var_bg + overflow / area(gt) + epsilon)
// with core = EM pixels, bg = gt pixels outside the EM (or, when that is
// empty, the ring between gt and gt scaled 1.25x minus the EM), overflow = EM
// pixels outside gt and population variances.
// Throws kEmptyMask, kEmptyBackground.
MaskScoreTerms MaskScoreDetailed(const GrayImage& image, const BinaryMask& em,
                                 const BBox& gt, double epsilon);
double MaskScore(const GrayImage& image, const BinaryMask& em, const BBox& gt,
                 double epsilon);

// Min-max to [0, 1]; a constant input maps to all 1.0.
std::vector<double> InstanceNormalize(std::span<const double> values);

struct RefinementRecord {
  int instance_id = 0;
  AttributionPoint point;
  BinaryMask em;  // full-image coordinates
  double mask_iou = 0.0;
  double mask_score = 0.0;
  double iou_norm = 0.0;
  double score_norm = 0.0;
  bool retained = false;
  // Empty EM or undefined score; never normalised or retained.
  bool degenerate = false;
};

// Normalises mask_iou and mask_score separately over the non-degenerate
// records, which must all belong to one instance.
void NormalizeInstance(std::vector<RefinementRecord>& records);

// retained = score_norm > score_threshold && iou_norm > iou_threshold.
std::vector<RefinementRecord> DualFilter(std::vector<RefinementRecord> records,
                                         const RefineConfig& config);

// Keeps the original value inside the union of retained EMs, zero elsewhere.
AttributionMap RefineAttribution(const AttributionMap& map,
                                 std::span<const RefinementRecord> records);

// Segments `point` in every window and returns the per-slice masks in window
// coordinates, ready for EnhancedMask.
std::vector<std::pair<SliceWindow, BinaryMask>> SegmentSlices(
    const GrayImage& image, const BBox& pred_box, const AttributionPoint& point,
    std::span<const SliceWindow> windows, const SegmenterBackend& backend);

// EM plus metrics for one attribution point (not yet normalised).
RefinementRecord EvaluatePoint(const GrayImage& image, const Detection& det,
                               const BBox& reference_box,
                               const AttributionPoint& point,
                               const SegmenterBackend& backend,
                               const RefineConfig& config);

struct InstanceResult {
  int instance_id = 0;
  BBox reference_box;
  // The reference box is B_pred because no annotation matched.
  bool reference_is_prediction = false;
  std::vector<RefinementRecord> records;  // ordered by rank
  AttributionMap refined;
};

// Evaluate, normalise, gate and mask for one detection.
InstanceResult RefineInstance(const GrayImage& image, const Detection& det,
                              const BBox& reference_box,
                              bool reference_is_prediction,
                              const AttributionMap& map,
                              std::span<const AttributionPoint> points,
                              const SegmenterBackend& backend,
                              const RefineConfig& config);

// Sensitivity of the EM metrics to the number of slices.
struct SweepRow {
  int n = 0;
  int rank = 0;
  bool present = false;  // false when the instance has fewer points
  int repeats = 0;
  int degenerate = 0;  // repeats with an empty EM or undefined score
  double iou_mean = 0.0;
  double iou_std = 0.0;
  double score_mean = 0.0;
  double score_std = 0.0;
};

// For each repeat r the slices come from master seed (config.master_seed + r);
// windows for n are the first n windows of that stream. Degenerate EMs count
// as MaskIoU 0 and are left out of the score statistics. Standard deviations
// are population values.
std::vector<SweepRow> NSweep(const GrayImage& image, const Detection& det,
                             const BBox& reference_box,
                             std::span<const AttributionPoint> points,
                             const SegmenterBackend& backend,
                             const RefineConfig& config,
                             std::span<const int> n_values,
                             std::span<const int> ranks, int repeats);

std::string SweepToCsv(std::span<const SweepRow> rows);

}  // namespace attrefine

#endif  // ATTREFINE_REFINE_H_
