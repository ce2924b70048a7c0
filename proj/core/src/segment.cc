// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/segment.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "attrefine/error.h"

namespace attrefine {

BinaryMask SegmenterBackend::Segment(const SegmentRequest& request) const {
  const int w = request.crop.width();
  const int h = request.crop.height();
  if (!request.crop.Bounds().Contains(request.point)) {
    std::ostringstream os;
    os << "point (" << request.point.x << "," << request.point.y
       << ") outside " << w << "x" << h << " crop";
    Fail(ErrorCode::kPromptOutsideCrop, os.str());
  }
  if (!request.box_prior.InsideImage(w, h)) {
    std::ostringstream os;
    os << "box prior " << request.box_prior << " outside " << w << "x" << h
       << " crop";
    Fail(ErrorCode::kPromptOutsideCrop, os.str());
  }
  return Run(request);
}

BinaryMask RegionGrow(const GrayImage& crop, Point seed, double tolerance,
                      const BBox& constraint) {
  if (!(tolerance >= 0.0 && tolerance <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "tolerance must lie in [0, 1]");
  }
  const int w = crop.width();
  const int h = crop.height();
  const auto region = ClipToImage(constraint, w, h);
  if (!region || !region->Contains(seed)) {
    std::ostringstream os;
    os << "seed (" << seed.x << "," << seed.y << ") outside constraint "
       << constraint;
    Fail(ErrorCode::kSeedOutsideConstraint, os.str());
  }

  std::vector<std::uint8_t> state(static_cast<std::size_t>(w) * h, 0);
  constexpr std::uint8_t kQueued = 1;
  constexpr std::uint8_t kAdmitted = 2;
  auto index = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  std::deque<Point> frontier{seed};
  state[index(seed.x, seed.y)] = kQueued;
  double mean = crop.at(seed.x, seed.y);
  std::int64_t admitted = 0;
  while (!frontier.empty()) {
    const Point p = frontier.front();
    frontier.pop_front();
    const double v = crop.at(p.x, p.y);
    if (std::abs(v - mean) > tolerance) {
      // Left unadmitted; a later neighbour may requeue it once the mean moves.
      state[index(p.x, p.y)] = 0;
      continue;
    }
    state[index(p.x, p.y)] = kAdmitted;
    ++admitted;
    // Incremental update keeps the mean exact on constant regions.
    mean += (v - mean) / static_cast<double>(admitted);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Point q{p.x + dx, p.y + dy};
        if (!region->Contains(q)) continue;
        std::uint8_t& s = state[index(q.x, q.y)];
        if (s != 0) continue;
        s = kQueued;
        frontier.push_back(q);
      }
    }
  }
  for (auto& s : state) s = s == kAdmitted ? 1 : 0;
  return BinaryMask::FromDense(w, h, state);
}

RegionGrowSegmenter::RegionGrowSegmenter(RegionGrowOptions options)
    : options_(options) {
  if (!(options_.tolerance >= 0.0 && options_.tolerance <= 1.0)) {
    Fail(ErrorCode::kConfigInvalid, "region-grow tolerance must lie in [0, 1]");
  }
  if (!(options_.box_dilation >= 1.0)) {
    Fail(ErrorCode::kConfigInvalid, "box dilation must be >= 1");
  }
}

BinaryMask RegionGrowSegmenter::Run(const SegmentRequest& request) const {
  double tolerance = options_.tolerance;
  if (auto it = request.params.find("tolerance"); it != request.params.end()) {
    tolerance = std::stod(it->second);
  }
  const int w = request.crop.width();
  const int h = request.crop.height();
  const BBox constraint =
      DilatedPrior(request.box_prior, options_.box_dilation, w, h);

  if (!options_.normalize_crop) {
    return RegionGrow(request.crop, request.point, tolerance, constraint);
  }
  const auto data = request.crop.data();
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (range <= 0.0) {
    return RegionGrow(request.crop, request.point, tolerance, constraint);
  }
  std::vector<double> stretched(data.size());
  std::transform(data.begin(), data.end(), stretched.begin(),
                 [&](double v) { return std::clamp((v - lo) / range, 0.0, 1.0); });
  return RegionGrow(GrayImage(w, h, std::move(stretched)), request.point,
                    tolerance, constraint);
}

MockSegmenter::MockSegmenter(Callback callback)
    : callback_(std::move(callback)) {}

std::unique_ptr<MockSegmenter> MockSegmenter::Fixed(BinaryMask mask) {
  return std::make_unique<MockSegmenter>(
      [mask = std::move(mask)](const SegmentRequest&) { return mask; });
}

std::unique_ptr<MockSegmenter> MockSegmenter::Empty() {
  return std::make_unique<MockSegmenter>([](const SegmentRequest& r) {
    return BinaryMask(r.crop.width(), r.crop.height());
  });
}

std::unique_ptr<MockSegmenter> MockSegmenter::Full() {
  return std::make_unique<MockSegmenter>([](const SegmentRequest& r) {
    return BinaryMask::FromBox(r.crop.width(), r.crop.height(),
                               r.crop.Bounds());
  });
}

BinaryMask MockSegmenter::Run(const SegmentRequest& request) const {
  return callback_(request);
}

BBox DilatedPrior(const BBox& box_prior, double factor, int crop_width,
                  int crop_height) {
  return ScaleAboutCenter(box_prior, factor, crop_width, crop_height);
}

}  // namespace attrefine
