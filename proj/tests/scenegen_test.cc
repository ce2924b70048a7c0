// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/scenegen.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "attrefine/error.h"
#include "attrefine/io.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace attrefine {
namespace {

using ::attrefine::testing::TempDir;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected attrefine::Error";
  return ErrorCode::kInvalidArgument;
}

SceneSpec Clean(int blobs) {
  SceneSpec s;
  s.width = 64;
  s.height = 64;
  s.blob_count = blobs;
  s.background = BackgroundKind::kFlat;
  s.noise_sigma = 0.0;
  return s;
}

TEST(SceneGenTest, NoBlobsGivesBareBackground) {
  const Scene sc = GenerateScene(Clean(0));
  EXPECT_TRUE(sc.annotation.gt_boxes.empty());
  EXPECT_TRUE(sc.annotation.detections.empty());
  for (double v : sc.image.data()) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(SceneGenTest, SingleBlobPeaksAtItsCenter) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SceneSpec s = Clean(1);
    s.seed = seed;
    const Scene sc = GenerateScene(s);
    ASSERT_EQ(sc.blobs.size(), 1u);
    const auto& px = sc.image.data();
    const double peak = *std::max_element(px.begin(), px.end());
    EXPECT_DOUBLE_EQ(peak, 0.9);
    EXPECT_DOUBLE_EQ(sc.image.at(sc.blobs[0].cx, sc.blobs[0].cy), 0.9);
  }
}

TEST(SceneGenTest, Deterministic) {
  SceneSpec s;
  s.seed = 77;
  const Scene a = GenerateScene(s);
  const Scene b = GenerateScene(s);
  EXPECT_TRUE(std::equal(a.image.data().begin(), a.image.data().end(),
                         b.image.data().begin()));
  EXPECT_EQ(a.annotation.gt_boxes, b.annotation.gt_boxes);
  s.seed = 78;
  EXPECT_NE(GenerateScene(s).annotation.gt_boxes, a.annotation.gt_boxes);
}

TEST(SceneGenTest, BrightestPixelOfEachBlobLiesInItsBox) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SceneSpec s = Clean(4);
    s.width = s.height = 96;
    s.seed = seed;
    const Scene sc = GenerateScene(s);
    for (const Blob& b : sc.blobs) {
      // Search a neighbourhood larger than the box; the peak must be inside.
      double best = -1.0;
      Point arg{};
      const BBox probe = *ClipToImage({b.gt.x_min - 3, b.gt.y_min - 3,
                                       b.gt.x_max + 3, b.gt.y_max + 3},
                                      96, 96);
      for (int y = probe.y_min; y < probe.y_max; ++y) {
        for (int x = probe.x_min; x < probe.x_max; ++x) {
          if (sc.image.at(x, y) > best) {
            best = sc.image.at(x, y);
            arg = {x, y};
          }
        }
      }
      EXPECT_TRUE(b.gt.Contains(arg));
    }
  }
}

TEST(SceneGenTest, BoxesAreDisjointWithGap) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    SceneSpec s;
    s.seed = seed;
    s.blob_count = 8;
    const Scene sc = GenerateScene(s);
    const auto& boxes = sc.annotation.gt_boxes;
    ASSERT_EQ(boxes.size(), 8u);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      EXPECT_TRUE(boxes[i].InsideImage(s.width, s.height));
      for (std::size_t j = 0; j < i; ++j) {
        const BBox grown{boxes[i].x_min - 1, boxes[i].y_min - 1,
                         boxes[i].x_max + 1, boxes[i].y_max + 1};
        EXPECT_FALSE(Intersect(grown, boxes[j]).has_value());
      }
    }
  }
}

TEST(SceneGenTest, DetectionsArePaddedGroundTruth) {
  SceneSpec s;
  s.seed = 4;
  const Scene sc = GenerateScene(s);
  ASSERT_EQ(sc.annotation.detections.size(), sc.annotation.gt_boxes.size());
  for (std::size_t i = 0; i < sc.annotation.detections.size(); ++i) {
    const Detection& d = sc.annotation.detections[i];
    EXPECT_EQ(d.instance_id, static_cast<int>(i));
    EXPECT_TRUE(d.bbox.Contains(sc.annotation.gt_boxes[i]));
    EXPECT_TRUE(d.bbox.InsideImage(s.width, s.height));
    EXPECT_DOUBLE_EQ(d.confidence, 1.0);
  }
}

TEST(SceneGenTest, PixelsStayInUnitRange) {
  SceneSpec s;
  s.noise_sigma = 0.3;
  s.texture_amplitude = 0.9;
  const Scene sc = GenerateScene(s);
  for (double v : sc.image.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SceneGenTest, OvercrowdedSceneFailsPlacement) {
  SceneSpec s = Clean(40);
  s.width = s.height = 24;
  EXPECT_EQ(CodeOf([&] { GenerateScene(s); }), ErrorCode::kPlacementFailure);
}

TEST(BlobBoxTest, ThreeSigmaExtent) {
  EXPECT_EQ(BlobBox(20, 30, 2.0, 1.0, 0.0), (BBox{14, 27, 27, 34}));
  EXPECT_EQ(BlobBox(20, 30, 2.0, 1.0, std::numbers::pi / 2), (BBox{17, 24, 24, 37}));
}

// ---- annotations -----------------------------------------------------------

TEST(AnnotationTest, RoundTrip) {
  TempDir dir;
  SceneSpec s;
  const Scene sc = GenerateScene(s);
  WritePng(sc.image, dir / "img.png");
  Annotation a = sc.annotation;
  a.image_path = "img.png";
  SaveAnnotation(a, dir / "ann.json");
  const auto loaded = LoadAnnotations(dir / "ann.json");
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].image_path, dir / "img.png");
  EXPECT_EQ(loaded[0].gt_boxes, a.gt_boxes);
  ASSERT_EQ(loaded[0].detections.size(), a.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_EQ(loaded[0].detections[i].bbox, a.detections[i].bbox);
    EXPECT_EQ(loaded[0].detections[i].instance_id, a.detections[i].instance_id);
  }
  EXPECT_EQ(loaded[0].clipped_boxes, 0);
}

TEST(AnnotationTest, ArrayOfAnnotations) {
  TempDir dir;
  WritePng(GrayImage(10, 10, 0.5), dir / "a.png");
  WriteFileAtomic(dir / "all.json",
                  R"([{"image":"a.png","gt":[[1,1,4,4]]},)"
                  R"( {"image":"a.png","gt":[[2,2,5,5]],"detections":[]}])");
  EXPECT_EQ(LoadAnnotations(dir / "all.json").size(), 2u);
}

TEST(AnnotationTest, OverhangingBoxesAreClipped) {
  TempDir dir;
  WritePng(GrayImage(10, 8, 0.5), dir / "a.png");
  WriteFileAtomic(dir / "ann.json",
                  R"({"image":"a.png","gt":[[-2,3,5,12]],)"
                  R"("detections":[{"id":0,"bbox":[6,-1,14,4],"score":0.8}]})");
  const auto loaded = LoadAnnotations(dir / "ann.json");
  EXPECT_EQ(loaded[0].gt_boxes[0], (BBox{0, 3, 5, 8}));
  EXPECT_EQ(loaded[0].detections[0].bbox, (BBox{6, 0, 10, 4}));
  EXPECT_EQ(loaded[0].clipped_boxes, 2);
}

TEST(AnnotationTest, InvertedBoxIsMalformed) {
  TempDir dir;
  WritePng(GrayImage(10, 10, 0.5), dir / "a.png");
  WriteFileAtomic(dir / "ann.json", R"({"image":"a.png","gt":[[5,5,2,8]]})");
  EXPECT_EQ(CodeOf([&] { LoadAnnotations(dir / "ann.json"); }),
            ErrorCode::kMalformedAnnotation);
  WriteFileAtomic(dir / "ann2.json", R"({"image":"a.png","gt":[[3,3,3,8]]})");
  EXPECT_EQ(CodeOf([&] { LoadAnnotations(dir / "ann2.json"); }),
            ErrorCode::kMalformedAnnotation);
  WriteFileAtomic(dir / "ann3.json", R"({"image":"a.png","gt":[[30,30,40,40]]})");
  EXPECT_EQ(CodeOf([&] { LoadAnnotations(dir / "ann3.json"); }),
            ErrorCode::kMalformedAnnotation);
}

TEST(AnnotationTest, MissingImage) {
  TempDir dir;
  WriteFileAtomic(dir / "ann.json", R"({"image":"gone.png","gt":[[1,1,3,3]]})");
  EXPECT_EQ(CodeOf([&] { LoadAnnotations(dir / "ann.json"); }),
            ErrorCode::kMissingImage);
}

TEST(AnnotationTest, GarbageJson) {
  TempDir dir;
  WriteFileAtomic(dir / "ann.json", "{ not json");
  EXPECT_EQ(CodeOf([&] { LoadAnnotations(dir / "ann.json"); }),
            ErrorCode::kMalformedAnnotation);
}

}  // namespace
}  // namespace attrefine
