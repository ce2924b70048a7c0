// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_SEGMENT_H_
#define ATTREFINE_SEGMENT_H_

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "attrefine/geometry.h"
#include "attrefine/image.h"
#include "attrefine/mask.h"

namespace attrefine {

// One point + box prompt. Point and box are in crop coordinates.
struct SegmentRequest {
  GrayImage crop;
  Point point;
  BBox box_prior;
  std::map<std::string, std::string> params;
};

// Promptable segmenter. Implementations must tolerate concurrent Run()
// calls. An empty mask is a valid answer.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;

  virtual std::string name() const = 0;
  // Bit-identical masks for identical requests.
  virtual bool deterministic() const = 0;

  // Validates the prompt (kPromptOutsideCrop), then delegates to Run().
  BinaryMask Segment(const SegmentRequest& request) const;

 protected:
  virtual BinaryMask Run(const SegmentRequest& request) const = 0;
};

// Breadth-first flood fill from `seed` with 8-connectivity. A pixel is
// admitted when |I(p) - mean| <= tolerance, where mean is the running mean of
// the pixels admitted so far. Growth never leaves `constraint`.
// Throws kSeedOutsideConstraint.
BinaryMask RegionGrow(const GrayImage& crop, Point seed, double tolerance,
                      const BBox& constraint);

struct RegionGrowOptions {
  double tolerance = 0.15;
  // Each side of the box prior is scaled about its center by this factor and
  // the result clipped to the crop.
  double box_dilation = 1.5;
  // Min-max stretch the crop before growing, so the outcome depends on the
  // crop's context the way a learned segmenter's input normalisation does.
  bool normalize_crop = true;
};

// Built-in deterministic stand-in for a promptable foundation segmenter.
// Honours params["tolerance"] as a per-request override.
class RegionGrowSegmenter : public SegmenterBackend {
 public:
  RegionGrowSegmenter() = default;
  explicit RegionGrowSegmenter(RegionGrowOptions options);

  std::string name() const override { return "builtin"; }
  bool deterministic() const override { return true; }
  const RegionGrowOptions& options() const { return options_; }

 protected:
  BinaryMask Run(const SegmentRequest& request) const override;

 private:
  RegionGrowOptions options_;
};

// Test backend: answers every request with a fixed mask (or a callback).
class MockSegmenter : public SegmenterBackend {
 public:
  using Callback = std::function<BinaryMask(const SegmentRequest&)>;

  explicit MockSegmenter(Callback callback);
  // Exactly `mask` for every request, whatever the prompt.
  static std::unique_ptr<MockSegmenter> Fixed(BinaryMask mask);
  // Empty / full masks sized to each request's crop.
  static std::unique_ptr<MockSegmenter> Empty();
  static std::unique_ptr<MockSegmenter> Full();

  std::string name() const override { return "mock"; }
  bool deterministic() const override { return true; }

 protected:
  BinaryMask Run(const SegmentRequest& request) const override;

 private:
  Callback callback_;
};

// Box prior scaled about its center and clipped to the crop.
BBox DilatedPrior(const BBox& box_prior, double factor, int crop_width,
                  int crop_height);

}  // namespace attrefine

#endif  // ATTREFINE_SEGMENT_H_
