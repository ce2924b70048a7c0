// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Everything runs on synthetic scenes
// with the built-in and mock backends.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "attrefine/attribution.h"
#include "attrefine/config.h"
#include "attrefine/error.h"
#include "attrefine/io.h"
#include "attrefine/pipeline.h"
#include "attrefine/refine.h"
#include "attrefine/scenegen.h"
#include "attrefine/segment.h"
#include "attrefine/toy_scorer.h"
#include "oracles.h"

namespace attrefine {
namespace {

namespace t = ::attrefine::testing;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Sum(const Tensor& values) {
  double s = 0.0;
  for (float v : values.data()) s += v;
  return s;
}

// Grows a box until it covers its own receptive field, so the IG path
// integral sees every pixel the score depends on. Nullopt if that needs the
// image border.
std::optional<BBox> CoveringBox(const ToyScorer& scorer, BBox box, int w, int h) {
  for (int iter = 0; iter < 4; ++iter) {
    const BBox rf = scorer.ReceptiveField(box, w, h);
    if (rf.x_min == 0 || rf.y_min == 0 || rf.x_max == w || rf.y_max == h) {
      return std::nullopt;
    }
    if (box.Contains(rf)) return box;
    box = {std::min(box.x_min, rf.x_min), std::min(box.y_min, rf.y_min),
           std::max(box.x_max, rf.x_max), std::max(box.y_max, rf.y_max)};
  }
  return std::nullopt;
}

Outcome IgCompleteness() {
  const auto start = std::chrono::steady_clock::now();
  const ToyScorer scorer;
  double worst30 = 0.0, worst300 = 0.0;
  int fallback_boxes = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneSpec spec;
    spec.width = spec.height = 32;
    spec.blob_count = 1;
    spec.seed = seed;
    const Scene sc = GenerateScene(spec);
    auto box = CoveringBox(scorer, sc.annotation.detections[0].bbox, 32, 32);
    if (!box) {
      box = BBox{7, 7, 26, 26};
      ++fallback_boxes;
    }
    const GrayImage zero(32, 32, 0.0);
    const double delta =
        scorer.Score(sc.image, *box).score - scorer.Score(zero, *box).score;
    for (int steps : {30, 300}) {
      const AttributionMap m =
          IntegratedGradients(scorer, sc.image, zero, {0, *box}, steps);
      const double rel = std::abs(Sum(m.values) - delta) / std::abs(delta);
      double& worst = steps == 30 ? worst30 : worst300;
      worst = std::max(worst, rel);
    }
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start).count();
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "max rel err %.3g @30 steps, %.3g @300 steps, %.2f s, "
                "%d scenes on the fixed interior box",
                worst30, worst300, secs, fallback_boxes);
  return {worst30 <= 1e-2 && worst300 <= 1e-3 && secs < 10.0, buf};
}

Outcome GradientOracle() {
  constexpr double kStep = 1e-5;
  const ToyScorer scorer;
  double worst_input = 0.0, worst_feature = 0.0;
  int kinks = 0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const GrayImage img = t::RandomImage(rng, 24, 20);
    std::uniform_int_distribution<int> lo(0, 8), size(4, 12);
    const int x0 = lo(rng), y0 = lo(rng);
    const BBox box{x0, y0, std::min(24, x0 + size(rng)), std::min(20, y0 + size(rng))};
    const ScorerTrace tr = scorer.Score(img, box);

    const auto fd = t::FiniteDifferenceInputGrad(scorer, img, box, kStep);
    const auto kink = t::KinkStraddlers(scorer, img, box, kStep);
    const auto grad = tr.input_grad.data();
    for (std::size_t i = 0; i < fd.size(); ++i) {
      if (kink[i]) {
        ++kinks;
        continue;
      }
      worst_input = std::max(worst_input, std::abs(grad[i] - fd[i]));
      ++checked;
    }

    const int fh = static_cast<int>(tr.features.shape()[1]);
    const int fw = static_cast<int>(tr.features.shape()[2]);
    std::vector<double> feats(tr.features.data().begin(), tr.features.data().end());
    for (std::size_t idx = 0; idx < feats.size(); ++idx) {
      const double keep = feats[idx];
      feats[idx] = keep + kStep;
      const double up = t::HeadFromFeatures(scorer, feats, fh, fw, tr.footprint);
      feats[idx] = keep - kStep;
      const double down = t::HeadFromFeatures(scorer, feats, fh, fw, tr.footprint);
      feats[idx] = keep;
      worst_feature = std::max(
          worst_feature,
          std::abs(tr.feature_grads.data()[idx] - (up - down) / (2 * kStep)));
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "max abs err input %.3g, feature %.3g; %zu pixels checked, "
                "%d kink pixels skipped",
                worst_input, worst_feature, checked, kinks);
  return {worst_input <= 1e-4 && worst_feature <= 1e-4, buf};
}

Outcome GradCamEquivalence() {
  const ToyScorer scorer;
  int mismatched_maps = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const GrayImage img = t::RandomImage(rng, 40, 36);
    std::uniform_int_distribution<int> lo(0, 20), size(4, 16);
    const int x0 = lo(rng), y0 = lo(rng);
    const Detection det{0, {x0, y0, std::min(40, x0 + size(rng)),
                            std::min(36, y0 + size(rng))}};
    const ScorerTrace tr = scorer.Score(img, det.bbox);
    const AttributionMap cam = GradCam(tr, det, 40, 36);
    const Tensor naive = t::NaiveGradCam(tr, det, 40, 36);
    const auto a = cam.values.data();
    const auto b = naive.data();
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) {
      same = std::memcmp(&a[i], &b[i], sizeof(float)) == 0;
    }
    if (!same) ++mismatched_maps;
  }
  return {mismatched_maps == 0,
          std::to_string(mismatched_maps) + "/10 traces differ from the oracle"};
}

Outcome MetricOracles() {
  std::mt19937_64 rng(2024);
  int iou_mismatch = 0;
  for (int i = 0; i < 100; ++i) {
    const BinaryMask em = t::RandomMask(rng, 30, 26, 0.5);
    const BBox gt = t::RandomBox(rng, 30, 26);
    if (MaskIou(em, gt) != t::BruteMaskIou(em, gt)) ++iou_mismatch;
  }

  double worst = 0.0;
  int scored = 0;
  for (int i = 0; i < 100; ++i) {
    const GrayImage img = t::RandomImage(rng, 24, 20);
    const BinaryMask em = t::RandomMask(rng, 24, 20, 0.6);
    const BBox gt = t::RandomBox(rng, 24, 20);
    const auto expected = t::PerPixelMaskScore(img, em, gt, 1e-8);
    if (!expected) continue;
    const double s = MaskScore(img, em, gt, 1e-8);
    const double rel = *expected == 0.0 ? std::abs(s)
                                        : std::abs(s - *expected) / std::abs(*expected);
    worst = std::max(worst, rel);
    ++scored;
  }

  // 5x5 core at 0.9 inside a 10x10 gt at 0.1, plus 10 overflow pixels at 0.9:
  // (0.9 - 0.1)^2 / (10 / 100 + 1e-8).
  std::vector<double> px(400, 0.1);
  std::vector<std::uint8_t> dense(400, 0);
  for (int y = 7; y < 12; ++y) {
    for (int x = 7; x < 12; ++x) {
      px[y * 20 + x] = 0.9;
      dense[y * 20 + x] = 1;
    }
  }
  for (int x = 0; x < 10; ++x) {
    px[x] = 0.9;
    dense[x] = 1;
  }
  const GrayImage fimg(20, 20, px);
  const BinaryMask fem = BinaryMask::FromDense(20, 20, dense);
  const BBox fgt{5, 5, 15, 15};
  const double fixture = MaskScore(fimg, fem, fgt, 1e-8);
  const double hand = 0.8 * 0.8 / (0.1 + 1e-8);
  const double fixture_rel = std::abs(fixture - hand) / hand;
  const double fixture_oracle_rel =
      std::abs(fixture - *t::PerPixelMaskScore(fimg, fem, fgt, 1e-8)) / hand;

  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "mask_iou %d/100 mismatches; mask_score max rel err %.3g over "
                "%d cases; overflow fixture %.10g (rel err %.3g vs hand, %.3g "
                "vs oracle)",
                iou_mismatch, worst, scored, fixture, fixture_rel,
                fixture_oracle_rel);
  return {iou_mismatch == 0 && scored > 50 && worst <= 1e-9 && fixture_rel <= 1e-9 &&
              fixture_oracle_rel <= 1e-9,
          buf};
}

Outcome EmMonotonicity() {
  const PipelineConfig cfg = LoadConfig("");
  const RegionGrowSegmenter backend;
  int violations = 0, instances = 0, shrinks = 0;
  for (std::uint64_t seed = 1; instances < 50; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.blob_count = 2;
    const Scene sc = GenerateScene(spec);
    const auto dets = DetectionsFor(sc.annotation);
    const auto attributed = AttributeImage(cfg, sc.image, dets, cfg.attribution.method);
    for (const AttributedInstance& inst : attributed) {
      if (instances == 50) break;
      if (inst.points.empty()) continue;
      ++instances;
      const auto windows =
          RandomSlices(sc.image.width(), sc.image.height(), inst.det.bbox, 10,
                       cfg.refine.area_ratio, seed, inst.det.instance_id);
      const auto per_slice =
          SegmentSlices(sc.image, inst.det.bbox, inst.points[0], windows, backend);
      std::span<const std::pair<SliceWindow, BinaryMask>> all(per_slice);
      BinaryMask prev = EnhancedMask(sc.image.width(), sc.image.height(), all.first(1));
      for (std::size_t k = 1; k < per_slice.size(); ++k) {
        const BinaryMask next =
            EnhancedMask(sc.image.width(), sc.image.height(), all.first(k + 1));
        if (next.And(prev) != next) ++violations;
        if (next.Count() < prev.Count()) ++shrinks;
        prev = next;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over " +
                               std::to_string(instances) + " instances (" +
                               std::to_string(shrinks) + " strict shrinks)"};
}

Outcome SliceCountPlateau() {
  const PipelineConfig cfg = LoadConfig("");
  const auto backend = MakeBackend(cfg.segment);
  const std::vector<int> ns = {2, 10};
  const std::vector<int> ranks = {1};
  double std2 = 0.0, std10 = 0.0;
  int scenes = 0, holds = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneSpec spec = cfg.scene;
    spec.seed = seed;
    const Scene sc = GenerateScene(spec);
    const auto dets = DetectionsFor(sc.annotation);
    const std::vector<Detection> first(dets.begin(), dets.begin() + 1);
    const auto attributed = AttributeImage(cfg, sc.image, first, cfg.attribution.method);
    const auto [ref, fallback] = MatchReference(first[0], sc.annotation.gt_boxes);
    const auto rows = NSweep(sc.image, first[0], ref, attributed[0].points, *backend,
                             cfg.refine, ns, ranks, 30);
    if (!rows[0].present) continue;
    ++scenes;
    std2 += rows[0].iou_std;
    std10 += rows[1].iou_std;
    if (rows[1].iou_std <= rows[0].iou_std) ++holds;
  }
  std2 /= scenes;
  std10 /= scenes;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "mean rank-1 MaskIoU std %.4g at n=10 vs %.4g at n=2 over %d "
                "scenes x 30 repeats (n=10 <= n=2 in %d scenes)",
                std10, std2, scenes, holds);
  return {scenes == 20 && std10 <= std2, buf};
}

Outcome DualGate() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rec = [](double score_norm, double iou_norm) {
    RefinementRecord r;
    r.score_norm = score_norm;
    r.iou_norm = iou_norm;
    r.em = BinaryMask::FromBox(4, 4, {0, 0, 1, 1});
    return r;
  };
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<RefinementRecord> recs(1 + i % 25);
    for (auto& r : recs) r = rec(u(rng), u(rng));
    RefineConfig lo;
    lo.score_threshold = u(rng);
    lo.iou_threshold = u(rng);
    RefineConfig hi = lo;
    hi.score_threshold += (1.0 - lo.score_threshold) * u(rng);
    hi.iou_threshold += (1.0 - lo.iou_threshold) * u(rng);
    const auto a = DualFilter(recs, lo);
    const auto b = DualFilter(recs, hi);
    for (std::size_t j = 0; j < recs.size(); ++j) {
      if (b[j].retained && !a[j].retained) ++violations;
    }
  }
  const RefineConfig def;
  const auto edge =
      DualFilter({rec(0.4, 0.9), rec(0.9, 0.3), rec(0.4000001, 0.3000001)}, def);
  const bool strict = !edge[0].retained && !edge[1].retained && edge[2].retained;
  const bool defaults = def.score_threshold == 0.4 && def.iou_threshold == 0.3;
  return {violations == 0 && strict && defaults,
          "thresholds (" + std::to_string(def.score_threshold) + ", " +
              std::to_string(def.iou_threshold) + "); " +
              std::to_string(violations) +
              " monotonicity violations over 100 sets; score_norm=0.4 " +
              (edge[0].retained ? "retained" : "rejected")};
}

Outcome BackgroundSuppression() {
  const PipelineConfig cfg = LoadConfig("");
  const auto backend = MakeBackend(cfg.segment);
  int instances = 0, ok = 0, with_retained = 0;
  double raw_sum = 0.0, refined_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneSpec spec = cfg.scene;
    spec.background = BackgroundKind::kCircuit;
    spec.seed = seed;
    const Scene sc = GenerateScene(spec);
    const ImageInput input{"scene", sc.image, sc.annotation};
    const auto dets = DetectionsFor(sc.annotation);
    const auto attributed = AttributeImage(cfg, sc.image, dets, cfg.attribution.method);
    const ImageRefinement run = RefineImage(cfg, input, attributed, *backend);
    for (std::size_t i = 0; i < run.instances.size(); ++i) {
      const InstanceResult& res = run.instances[i];
      const double raw = ComputeEnergy(attributed[i].map, res.reference_box).OutsideFraction();
      const double refined = ComputeEnergy(res.refined, res.reference_box).OutsideFraction();
      ++instances;
      if (refined <= raw) ++ok;
      raw_sum += raw;
      refined_sum += refined;
      for (const auto& r : res.records) {
        if (r.retained) {
          ++with_retained;
          break;
        }
      }
    }
  }
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "%d/%d instances not worse (%.1f%%); mean outside fraction "
                "%.4f raw -> %.4f refined; %d instances retain a point",
                ok, instances, 100.0 * ok / instances, raw_sum / instances,
                refined_sum / instances, with_retained);
  return {instances > 0 && ok >= 0.9 * instances, buf};
}

Outcome Determinism() {
  t::TempDir dir;
  WriteFileAtomic(dir / "spec.json", R"({"scenes": 3, "blob_count": 3, "seed": 9})");
  std::ostringstream log;
  CmdGen(dir / "spec.json", dir / "scenes", log);
  const auto ann = dir / "scenes" / "annotations.json";
  std::vector<std::string> csvs;
  for (int workers : {1, 8, 1, 8}) {
    PipelineConfig cfg = LoadConfig("", {"master_seed=123"});
    cfg.workers = workers;
    const auto out = dir / ("run" + std::to_string(csvs.size()));
    CmdRefine(cfg, ann, std::nullopt, std::nullopt, out, log);
    csvs.push_back(ReadFile(out / "report.csv"));
  }
  bool same = true;
  for (const auto& c : csvs) same = same && c == csvs[0];
  return {same && !csvs[0].empty(),
          "4 runs (workers 1, 8, 1, 8): " +
              std::string(same ? "byte-identical" : "differ") + ", " +
              std::to_string(csvs[0].size()) + " bytes"};
}

}  // namespace
}  // namespace attrefine

int main() {
  using attrefine::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"ig_completeness", attrefine::IgCompleteness},
      {"gradient_oracle", attrefine::GradientOracle},
      {"gradcam_oracle_equivalence", attrefine::GradCamEquivalence},
      {"metric_oracles", attrefine::MetricOracles},
      {"em_monotonicity", attrefine::EmMonotonicity},
      {"slice_count_plateau", attrefine::SliceCountPlateau},
      {"dual_gate", attrefine::DualGate},
      {"background_suppression", attrefine::BackgroundSuppression},
      {"determinism", attrefine::Determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
