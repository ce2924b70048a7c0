// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/refine.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "attrefine/error.h"
#include "attrefine/rng.h"

namespace attrefine {
namespace {

// Side length scaled by sqrt(area_ratio); the small slack absorbs rounding so
// that an exact product (e.g. ratio 1) is not bumped up by ceil.
int ScaledSide(int side, double area_ratio) {
  return static_cast<int>(std::ceil(side * std::sqrt(area_ratio) - 1e-9));
}

// Start coordinate of a span of length `len` centered near `center`, then
// moved minimally so [start, start+len) covers [lo, hi) and stays in [0, limit).
int PlaceSpan(double center, int len, int lo, int hi, int limit) {
  int start = static_cast<int>(std::lround(center - 0.5 * len));
  const int min_start = std::max(0, hi - len);
  const int max_start = std::min(lo, limit - len);
  return std::clamp(start, min_start, max_start);
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// Two-pass population moments.
Moments PopulationMoments(std::span<const double> values) {
  Moments m;
  if (values.empty()) return m;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.var = ss / static_cast<double>(values.size());
  return m;
}

}  // namespace

void RefineConfig::Validate() const {
  if (n_slices < 1) Fail(ErrorCode::kConfigInvalid, "n_slices must be >= 1");
  if (!(area_ratio >= 1.0)) {
    Fail(ErrorCode::kConfigInvalid, "area_ratio must be >= 1");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0) ||
      !(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    Fail(ErrorCode::kConfigInvalid, "thresholds must lie in [0, 1]");
  }
  if (!(epsilon >= 0.0)) Fail(ErrorCode::kConfigInvalid, "epsilon must be >= 0");
  if (!(jitter_fraction >= 0.0 && jitter_fraction <= 0.5)) {
    Fail(ErrorCode::kConfigInvalid, "jitter_fraction must lie in [0, 0.5]");
  }
}

SliceWindow SliceAt(int image_width, int image_height, const BBox& box,
                    double area_ratio, double jitter_fraction,
                    std::uint64_t master_seed, int instance_id,
                    int slice_index) {
  if (!box.InsideImage(image_width, image_height)) {
    std::ostringstream os;
    os << box << " outside " << image_width << "x" << image_height;
    Fail(ErrorCode::kBoxOutOfBounds, os.str());
  }
  const int win_w = std::min(ScaledSide(box.Width(), area_ratio), image_width);
  const int win_h = std::min(ScaledSide(box.Height(), area_ratio), image_height);

  Rng rng(DeriveSeed({master_seed, static_cast<std::uint64_t>(instance_id),
                      static_cast<std::uint64_t>(slice_index)}));
  const double jx = jitter_fraction * win_w;
  const double jy = jitter_fraction * win_h;
  const double cx = box.CenterX() + rng.Uniform(-jx, jx);
  const double cy = box.CenterY() + rng.Uniform(-jy, jy);

  const int x0 = PlaceSpan(cx, win_w, box.x_min, box.x_max, image_width);
  const int y0 = PlaceSpan(cy, win_h, box.y_min, box.y_max, image_height);
  return {BBox{x0, y0, x0 + win_w, y0 + win_h}, slice_index};
}

std::vector<SliceWindow> RandomSlices(int image_width, int image_height,
                                      const BBox& box, int n,
                                      double area_ratio,
                                      std::uint64_t master_seed,
                                      int instance_id,
                                      double jitter_fraction) {
  if (n < 1) Fail(ErrorCode::kInvalidArgument, "need at least one slice");
  std::vector<SliceWindow> windows;
  windows.reserve(n);
  for (int i = 0; i < n; ++i) {
    windows.push_back(SliceAt(image_width, image_height, box, area_ratio,
                              jitter_fraction, master_seed, instance_id, i));
  }
  return windows;
}

BinaryMask EnhancedMask(
    int image_width, int image_height,
    std::span<const std::pair<SliceWindow, BinaryMask>> per_slice) {
  if (per_slice.empty()) {
    Fail(ErrorCode::kInvalidArgument, "enhanced mask needs at least one slice");
  }
  BinaryMask em;
  bool first = true;
  for (const auto& [slice, mask] : per_slice) {
    if (mask.width() != slice.window.Width() ||
        mask.height() != slice.window.Height()) {
      std::ostringstream os;
      os << "slice " << slice.seed_index << " mask " << mask.width() << "x"
         << mask.height() << " vs window " << slice.window;
      Fail(ErrorCode::kWindowMaskMismatch, os.str());
    }
    BinaryMask placed = mask.PlacedIn(image_width, image_height,
                                      slice.window.x_min, slice.window.y_min);
    em = first ? std::move(placed) : em.And(placed);
    first = false;
  }
  return em;
}

double MaskIou(const BinaryMask& em, const BBox& gt) {
  if (em.Empty()) return 0.0;
  return BoxIou(MaskBBox(em), gt);
}

MaskScoreTerms MaskScoreDetailed(const GrayImage& image, const BinaryMask& em,
                                 const BBox& gt, double epsilon) {
  if (em.Empty()) Fail(ErrorCode::kEmptyMask, "MaskScore needs a non-empty EM");
  if (!gt.Valid()) Fail(ErrorCode::kInvalidArgument, "invalid reference box");
  if (em.width() != image.width() || em.height() != image.height()) {
    Fail(ErrorCode::kShapeMismatch, "EM and image dimensions differ");
  }
  const int w = image.width();
  const int h = image.height();
  const auto dense = em.ToDense();
  auto in_em = [&](int x, int y) {
    return dense[static_cast<std::size_t>(y) * w + x] != 0;
  };

  MaskScoreTerms t;
  std::vector<double> core;
  core.reserve(static_cast<std::size_t>(em.Count()));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in_em(x, y)) continue;
      core.push_back(image.at(x, y));
      if (!gt.Contains(x, y)) ++t.overflow;
    }
  }

  std::vector<double> bg;
  if (const auto clipped = ClipToImage(gt, w, h)) {
    for (int y = clipped->y_min; y < clipped->y_max; ++y) {
      for (int x = clipped->x_min; x < clipped->x_max; ++x) {
        if (!in_em(x, y)) bg.push_back(image.at(x, y));
      }
    }
  }
  if (bg.empty()) {
    t.bg_fallback = true;
    const BBox ring = ScaleAboutCenter(gt, 1.25, w, h);
    for (int y = ring.y_min; y < ring.y_max; ++y) {
      for (int x = ring.x_min; x < ring.x_max; ++x) {
        if (!gt.Contains(x, y) && !in_em(x, y)) bg.push_back(image.at(x, y));
      }
    }
    if (bg.empty()) {
      std::ostringstream os;
      os << "no background pixels around " << gt;
      Fail(ErrorCode::kEmptyBackground, os.str());
    }
  }

  const Moments mc = PopulationMoments(core);
  const Moments mb = PopulationMoments(bg);
  t.core_mean = mc.mean;
  t.core_var = mc.var;
  t.bg_mean = mb.mean;
  t.bg_var = mb.var;
  t.core_count = static_cast<std::int64_t>(core.size());
  t.bg_count = static_cast<std::int64_t>(bg.size());
  t.lambda = 1.0 / static_cast<double>(gt.Area());
  const double contrast = (t.core_mean - t.bg_mean) * (t.core_mean - t.bg_mean);
  const double spread = t.core_var + t.bg_var +
                        t.lambda * static_cast<double>(t.overflow) + epsilon;
  t.score = spread > 0.0 ? contrast / spread : 0.0;
  return t;
}

double MaskScore(const GrayImage& image, const BinaryMask& em, const BBox& gt,
                 double epsilon) {
  return MaskScoreDetailed(image, em, gt, epsilon).score;
}

std::vector<double> InstanceNormalize(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(values.size(), 1.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out[i] = (values[i] - min) / range;
    }
  }
  return out;
}

void NormalizeInstance(std::vector<RefinementRecord>& records) {
  std::vector<double> ious;
  std::vector<double> scores;
  for (const auto& r : records) {
    if (r.degenerate) continue;
    ious.push_back(r.mask_iou);
    scores.push_back(r.mask_score);
  }
  const auto iou_norm = InstanceNormalize(ious);
  const auto score_norm = InstanceNormalize(scores);
  std::size_t i = 0;
  for (auto& r : records) {
    if (r.degenerate) {
      r.iou_norm = 0.0;
      r.score_norm = 0.0;
      continue;
    }
    r.iou_norm = iou_norm[i];
    r.score_norm = score_norm[i];
    ++i;
  }
}

std::vector<RefinementRecord> DualFilter(std::vector<RefinementRecord> records,
                                         const RefineConfig& config) {
  for (auto& r : records) {
    r.retained = !r.degenerate && r.score_norm > config.score_threshold &&
                 r.iou_norm > config.iou_threshold;
  }
  return records;
}

AttributionMap RefineAttribution(const AttributionMap& map,
                                 std::span<const RefinementRecord> records) {
  const int w = map.width();
  const int h = map.height();
  BinaryMask keep(w, h);
  for (const auto& r : records) {
    if (r.instance_id != map.instance_id) {
      Fail(ErrorCode::kInvalidArgument,
           "record for instance " + std::to_string(r.instance_id) +
               " applied to map of instance " +
               std::to_string(map.instance_id));
    }
    if (r.retained) keep = keep.Or(r.em);
  }
  AttributionMap out = map;
  auto values = out.values.mutable_data();
  const auto dense = keep.ToDense();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!dense[i]) values[i] = 0.0f;
  }
  return out;
}

std::vector<std::pair<SliceWindow, BinaryMask>> SegmentSlices(
    const GrayImage& image, const BBox& pred_box, const AttributionPoint& point,
    std::span<const SliceWindow> windows, const SegmenterBackend& backend) {
  std::vector<std::pair<SliceWindow, BinaryMask>> out;
  out.reserve(windows.size());
  for (const SliceWindow& slice : windows) {
    const BBox& win = slice.window;
    SegmentRequest request;
    request.crop = image.Crop(win);
    request.point = {point.x - win.x_min, point.y - win.y_min};
    request.box_prior = pred_box.Translated(-win.x_min, -win.y_min);
    out.emplace_back(slice, backend.Segment(request));
  }
  return out;
}

RefinementRecord EvaluatePoint(const GrayImage& image, const Detection& det,
                               const BBox& reference_box,
                               const AttributionPoint& point,
                               const SegmenterBackend& backend,
                               const RefineConfig& config) {
  const auto windows =
      RandomSlices(image.width(), image.height(), det.bbox, config.n_slices,
                   config.area_ratio, config.master_seed, det.instance_id,
                   config.jitter_fraction);
  const auto per_slice = SegmentSlices(image, det.bbox, point, windows, backend);

  RefinementRecord record;
  record.instance_id = det.instance_id;
  record.point = point;
  record.em = EnhancedMask(image.width(), image.height(), per_slice);
  if (record.em.Empty()) {
    record.degenerate = true;
    return record;
  }
  record.mask_iou = MaskIou(record.em, reference_box);
  try {
    record.mask_score =
        MaskScore(image, record.em, reference_box, config.epsilon);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyBackground) throw;
    record.degenerate = true;
  }
  return record;
}

InstanceResult RefineInstance(const GrayImage& image, const Detection& det,
                              const BBox& reference_box,
                              bool reference_is_prediction,
                              const AttributionMap& map,
                              std::span<const AttributionPoint> points,
                              const SegmenterBackend& backend,
                              const RefineConfig& config) {
  config.Validate();
  InstanceResult result;
  result.instance_id = det.instance_id;
  result.reference_box = reference_box;
  result.reference_is_prediction = reference_is_prediction;
  for (const auto& p : points) {
    result.records.push_back(
        EvaluatePoint(image, det, reference_box, p, backend, config));
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const RefinementRecord& a, const RefinementRecord& b) {
              return a.point.rank < b.point.rank;
            });
  NormalizeInstance(result.records);
  result.records = DualFilter(std::move(result.records), config);
  result.refined = RefineAttribution(map, result.records);
  return result;
}

std::vector<SweepRow> NSweep(const GrayImage& image, const Detection& det,
                             const BBox& reference_box,
                             std::span<const AttributionPoint> points,
                             const SegmenterBackend& backend,
                             const RefineConfig& config,
                             std::span<const int> n_values,
                             std::span<const int> ranks, int repeats) {
  config.Validate();
  if (repeats < 1) Fail(ErrorCode::kInvalidArgument, "repeats must be >= 1");
  if (n_values.empty() || ranks.empty()) {
    Fail(ErrorCode::kInvalidArgument, "sweep needs n values and ranks");
  }
  for (int n : n_values) {
    if (n < 1) Fail(ErrorCode::kInvalidArgument, "sweep n values must be >= 1");
  }
  const int max_n = *std::max_element(n_values.begin(), n_values.end());
  const int w = image.width();
  const int h = image.height();

  std::vector<SweepRow> rows;
  for (int rank : ranks) {
    const auto it = std::find_if(points.begin(), points.end(),
                                 [&](const AttributionPoint& p) { return p.rank == rank; });
    if (it == points.end()) {
      for (int n : n_values) rows.push_back({n, rank, false, 0, 0});
      continue;
    }
    // samples[n] = per-repeat (iou, score or NaN)
    std::map<int, std::vector<std::pair<double, double>>> samples;
    for (int r = 0; r < repeats; ++r) {
      const auto windows =
          RandomSlices(w, h, det.bbox, max_n, config.area_ratio,
                       config.master_seed + static_cast<std::uint64_t>(r),
                       det.instance_id, config.jitter_fraction);
      const auto per_slice = SegmentSlices(image, det.bbox, *it, windows, backend);
      // Prefix intersections EM_1 ⊇ EM_2 ⊇ ... ⊇ EM_max_n.
      std::vector<BinaryMask> prefix;
      prefix.reserve(per_slice.size());
      for (const auto& [slice, mask] : per_slice) {
        BinaryMask placed =
            mask.PlacedIn(w, h, slice.window.x_min, slice.window.y_min);
        prefix.push_back(prefix.empty() ? std::move(placed)
                                        : prefix.back().And(placed));
      }
      for (int n : n_values) {
        const BinaryMask& em = prefix[n - 1];
        double iou = 0.0;
        double score = std::nan("");
        if (!em.Empty()) {
          iou = MaskIou(em, reference_box);
          try {
            score = MaskScore(image, em, reference_box, config.epsilon);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kEmptyBackground) throw;
          }
        }
        samples[n].emplace_back(iou, score);
      }
    }
    for (int n : n_values) {
      SweepRow row{n, rank, true, repeats, 0};
      std::vector<double> ious;
      std::vector<double> scores;
      for (const auto& [iou, score] : samples[n]) {
        ious.push_back(iou);
        if (std::isnan(score)) {
          ++row.degenerate;
        } else {
          scores.push_back(score);
        }
      }
      const Moments mi = PopulationMoments(ious);
      const Moments ms = PopulationMoments(scores);
      row.iou_mean = mi.mean;
      row.iou_std = std::sqrt(mi.var);
      row.score_mean = ms.mean;
      row.score_std = std::sqrt(ms.var);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string SweepToCsv(std::span<const SweepRow> rows) {
  std::string out =
      "n,rank,present,repeats,degenerate,mask_iou_mean,mask_iou_std,"
      "mask_score_mean,mask_score_std\n";
  char buf[512];
  for (const auto& r : rows) {
    if (!r.present) {
      std::snprintf(buf, sizeof(buf), "%d,%d,0,0,0,,,,\n", r.n, r.rank);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%d,1,%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                    r.n, r.rank, r.repeats, r.degenerate, r.iou_mean,
                    r.iou_std, r.score_mean, r.score_std);
    }
    out += buf;
  }
  return out;
}

}  // namespace attrefine
