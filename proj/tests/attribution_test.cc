// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/attribution.h"

#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "attrefine/error.h"
#include "attrefine/io.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace attrefine {
namespace {

using ::attrefine::testing::NaiveGradCam;
using ::attrefine::testing::RandomImage;
using ::attrefine::testing::SortScanPoints;
using ::attrefine::testing::TempDir;

double Sum(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data()) s += v;
  return s;
}

AttributionMap MapFromValues(int w, int h, const BBox& box,
                             const std::vector<float>& values) {
  AttributionMap m;
  m.box = box;
  m.values = Tensor({h, w}, values);
  return m;
}

// ---- Integrated Gradients ----------------------------------------------------

TEST(IntegratedGradientsTest, ImageEqualToBaselineGivesZeros) {
  const ToyScorer scorer;
  std::mt19937_64 rng(1);
  const GrayImage img = RandomImage(rng, 24, 24);
  const AttributionMap m =
      IntegratedGradients(scorer, img, img, {0, {4, 4, 20, 20}}, 30);
  for (float v : m.values.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(m.method, AttributionMethod::kIntegratedGradients);
}

TEST(IntegratedGradientsTest, CompletenessOnInteriorBox) {
  const ToyScorer scorer;
  const BBox box{7, 7, 26, 26};
  ASSERT_TRUE(scorer.ReceptiveField(box, 32, 32).x_min > 0);
  ASSERT_TRUE(box.Contains(scorer.ReceptiveField(box, 32, 32)));
  std::mt19937_64 rng(3);
  const GrayImage img = RandomImage(rng, 32, 32);
  const GrayImage zero(32, 32, 0.0);
  const double delta =
      scorer.Score(img, box).score - scorer.Score(zero, box).score;
  for (const auto& [steps, tol] :
       std::vector<std::pair<int, double>>{{30, 1e-2}, {300, 1e-3}}) {
    const AttributionMap m = IntegratedGradients(scorer, img, zero, {0, box}, steps);
    EXPECT_LE(std::abs(Sum(m.values) - delta) / std::abs(delta), tol)
        << steps << " steps";
  }
}

TEST(IntegratedGradientsTest, LinearScorerIsExact) {
  ToyScorerOptions opt;
  opt.activation = Activation::kIdentity;
  opt.head = Head::kLinear;
  const ToyScorer scorer(opt);
  std::mt19937_64 rng(5);
  const GrayImage img = RandomImage(rng, 20, 20);
  const GrayImage base = MakeBaseline(img, BaselineKind::kBlur, 2.0);
  const BBox box{5, 5, 15, 15};
  const ScorerTrace t = scorer.Score(img, box);
  const AttributionMap m = IntegratedGradients(scorer, img, base, {0, box}, 7);
  for (int y = box.y_min; y < box.y_max; ++y) {
    for (int x = box.x_min; x < box.x_max; ++x) {
      const double expected =
          (img.at(x, y) - base.at(x, y)) * static_cast<double>(t.input_grad.at(y, x));
      EXPECT_NEAR(m.values.at(y, x), expected, 1e-6);
    }
  }
}

TEST(IntegratedGradientsTest, ZeroOutsideBox) {
  const ToyScorer scorer;
  std::mt19937_64 rng(6);
  const GrayImage img = RandomImage(rng, 24, 24);
  const BBox box{6, 8, 14, 18};
  const AttributionMap m =
      IntegratedGradients(scorer, img, GrayImage(24, 24, 0.0), {3, box}, 10);
  EXPECT_EQ(m.instance_id, 3);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      if (!box.Contains(x, y)) EXPECT_EQ(m.values.at(y, x), 0.0f);
    }
  }
}

TEST(IntegratedGradientsTest, RejectsBadArguments) {
  const ToyScorer scorer;
  const GrayImage img(16, 16, 0.5);
  EXPECT_THROW(IntegratedGradients(scorer, img, img, {0, {2, 2, 8, 8}}, 0), Error);
  EXPECT_THROW(
      IntegratedGradients(scorer, img, GrayImage(8, 8, 0.0), {0, {2, 2, 6, 6}}, 5),
      Error);
}

// ---- Grad-CAM --------------------------------------------------------------

TEST(GradCamTest, UnitChannelWeightReproducesFeatures) {
  // One identity channel at stride 1 with a linear head whose weight equals
  // the footprint size: every channel weight is exactly 1 and the map is the
  // image itself.
  const BBox box{3, 2, 11, 9};
  ToyScorerOptions opt;
  opt.kernels = {KernelKind::kIdentity};
  opt.weights = {static_cast<double>(box.Area())};
  opt.stride = 1;
  opt.head = Head::kLinear;
  const ToyScorer scorer(opt);
  std::mt19937_64 rng(7);
  const GrayImage img = RandomImage(rng, 14, 12);
  const AttributionMap m = GradCam(scorer.Score(img, box), {0, box}, 14, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 14; ++x) {
      const double expected = box.Contains(x, y) ? img.at(x, y) : 0.0;
      EXPECT_NEAR(m.values.at(y, x), expected, 1e-6);
    }
  }
}

TEST(GradCamTest, NegativeChannelWeightsAreRectifiedAway) {
  ToyScorerOptions opt;
  opt.weights = {-1.0, -1.5, -0.5, -1.0};
  const ToyScorer scorer(opt);
  std::mt19937_64 rng(8);
  const GrayImage img = RandomImage(rng, 24, 24);
  const AttributionMap m = GradCam(scorer.Score(img, {4, 4, 20, 20}),
                                   {0, {4, 4, 20, 20}}, 24, 24);
  for (float v : m.values.data()) EXPECT_EQ(v, 0.0f);
}

TEST(GradCamTest, MatchesNaiveOracleBitForBit) {
  const ToyScorer scorer;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const GrayImage img = RandomImage(rng, 31, 27);
    const BBox box = ::attrefine::testing::RandomBox(rng, 31, 27);
    if (box.Width() < 3 || box.Height() < 3) continue;
    const ScorerTrace t = scorer.Score(img, box);
    const Detection det{0, box};
    EXPECT_EQ(GradCam(t, det, 31, 27).values, NaiveGradCam(t, det, 31, 27));
  }
}

TEST(GradCamTest, EmptyFootprintFromForeignTrace) {
  const ToyScorer scorer;
  const ScorerTrace t = scorer.Score(GrayImage(16, 16, 0.5), {2, 2, 10, 10});
  try {
    GradCam(t, {0, {15, 15, 16, 16}}, 16, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyFootprint);
  }
}

// ---- point extraction ------------------------------------------------------

TEST(ExtractPointsTest, SingleNonzeroPixel) {
  std::vector<float> v(100, 0.0f);
  v[3 * 10 + 4] = 0.7f;
  const auto pts = ExtractPoints(MapFromValues(10, 10, {0, 0, 10, 10}, v), 5, 1);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], (AttributionPoint{4, 3, 0.7f, 1}));
}

TEST(ExtractPointsTest, TiesBreakByRowThenColumn) {
  std::vector<float> v(100, 0.0f);
  v[5 * 10 + 1] = 1.0f;
  v[2 * 10 + 8] = -1.0f;
  v[2 * 10 + 3] = 1.0f;
  const auto pts = ExtractPoints(MapFromValues(10, 10, {0, 0, 10, 10}, v), 5, 1);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ((std::pair{pts[0].x, pts[0].y}), (std::pair{3, 2}));
  EXPECT_EQ((std::pair{pts[1].x, pts[1].y}), (std::pair{8, 2}));
  EXPECT_EQ((std::pair{pts[2].x, pts[2].y}), (std::pair{1, 5}));
  EXPECT_EQ(pts[1].value, -1.0);
}

TEST(ExtractPointsTest, MatchesSortAndScanOracle) {
  std::mt19937_64 rng(12);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_int_distribution<int> q(-3, 3);
  for (int t = 0; t < 60; ++t) {
    const int w = 23, h = 19;
    std::vector<float> v(static_cast<std::size_t>(w) * h);
    // Quantised values so ties occur.
    for (auto& x : v) x = (t % 2 == 0) ? n(rng) : static_cast<float>(q(rng));
    const BBox box = ::attrefine::testing::RandomBox(rng, w, h);
    AttributionMap m = MapFromValues(w, h, box, v);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!box.Contains(x, y)) m.values.at(y, x) = 0.0f;
      }
    }
    const int top_k = 1 + t % 25;
    const int sep = t % 4;
    EXPECT_EQ(ExtractPoints(m, top_k, sep), SortScanPoints(m, top_k, sep));
  }
}

TEST(ExtractPointsTest, SeparationAndOrderingProperties) {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int t = 0; t < 40; ++t) {
    std::vector<float> v(32 * 32);
    for (auto& x : v) x = n(rng);
    const int sep = t % 3;
    const auto pts = ExtractPoints(MapFromValues(32, 32, {4, 4, 28, 28}, v), 20, sep);
    EXPECT_LE(pts.size(), 20u);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_EQ(pts[i].rank, static_cast<int>(i) + 1);
      if (i > 0) {
        EXPECT_GE(std::abs(pts[i - 1].value), std::abs(pts[i].value));
      }
      for (std::size_t j = 0; j < i; ++j) {
        EXPECT_GT(ChebyshevDistance({pts[i].x, pts[i].y}, {pts[j].x, pts[j].y}), sep);
      }
    }
  }
}

TEST(ExtractPointsTest, AllZeroMapGivesNoPoints) {
  const auto pts = ExtractPoints(
      MapFromValues(8, 8, {0, 0, 8, 8}, std::vector<float>(64, 0.0f)), 20, 1);
  EXPECT_TRUE(pts.empty());
}

TEST(PointsJsonTest, RoundTrip) {
  const std::vector<AttributionPoint> pts = {{1, 2, 0.5, 1}, {7, 3, -0.25, 2}};
  EXPECT_EQ(PointsFromJson(PointsToJson(pts)), pts);
}

// ---- external maps ---------------------------------------------------------

TEST(ExternalMapTest, PassesValuesThroughInsideBox) {
  std::vector<float> v(12 * 10);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<float>(i % 7) - 3.0f;
  }
  const BBox box{2, 1, 9, 8};
  const AttributionMap m =
      ExternalMapFromTensor(Tensor({10, 12}, v), {4, box}, 12, 10);
  EXPECT_EQ(m.method, AttributionMethod::kExternal);
  bool saw_negative = false;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 12; ++x) {
      const float expected = box.Contains(x, y) ? v[y * 12 + x] : 0.0f;
      EXPECT_EQ(m.values.at(y, x), expected);
      saw_negative |= box.Contains(x, y) && expected < 0.0f;
    }
  }
  EXPECT_TRUE(saw_negative);
}

TEST(ExternalMapTest, ShapeMismatch) {
  try {
    ExternalMapFromTensor(Tensor({10, 11}), {0, {1, 1, 5, 5}}, 12, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(ExternalMapTest, LoadsFromFile) {
  TempDir dir;
  WriteTensor(Tensor({4, 4}, std::vector<float>(16, 0.5f)), dir / "m.sodt");
  const AttributionMap m = LoadExternalMap(dir / "m.sodt", {0, {1, 1, 3, 3}}, 4, 4);
  EXPECT_EQ(m.values.at(1, 1), 0.5f);
  EXPECT_EQ(m.values.at(0, 0), 0.0f);
}

// ---- energy ----------------------------------------------------------------

TEST(EnergyTest, OutsideFraction) {
  std::vector<float> v(16, 0.0f);
  v[0] = -1.0f;  // (0,0), outside
  v[5] = 3.0f;   // (1,1), inside
  const AttributionMap m = MapFromValues(4, 4, {0, 0, 4, 4}, v);
  const MapEnergy e = ComputeEnergy(m, {1, 1, 3, 3});
  EXPECT_DOUBLE_EQ(e.total, 4.0);
  EXPECT_DOUBLE_EQ(e.outside, 1.0);
  EXPECT_DOUBLE_EQ(e.OutsideFraction(), 0.25);
  EXPECT_DOUBLE_EQ(MapEnergy{}.OutsideFraction(), 0.0);
}

}  // namespace
}  // namespace attrefine
