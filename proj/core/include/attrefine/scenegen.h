// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_SCENEGEN_H_
#define ATTREFINE_SCENEGEN_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "attrefine/geometry.h"
#include "attrefine/image.h"

namespace attrefine {

enum class BackgroundKind { kFlat, kCircuit };

BackgroundKind ParseBackgroundKind(std::string_view name);
std::string_view BackgroundKindName(BackgroundKind kind);

struct SceneSpec {
  int width = 128;
  int height = 128;
  int blob_count = 4;
  double blob_intensity = 0.9;
  double blob_sigma_min = 1.2;
  double blob_sigma_max = 2.5;
  BackgroundKind background = BackgroundKind::kCircuit;
  double background_level = 0.1;
  // Peak-to-trough swing of the stripe texture (circuit background only).
  double texture_amplitude = 0.25;
  double noise_sigma = 0.02;
  // Synthetic detections are the GT boxes grown by this many pixels.
  int detection_padding = 2;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct Annotation {
  std::filesystem::path image_path;
  std::vector<BBox> gt_boxes;
  std::vector<Detection> detections;
  // Boxes repaired by clipping during load.
  int clipped_boxes = 0;
};

struct Blob {
  int cx = 0;
  int cy = 0;
  double sigma_major = 1.0;
  double sigma_minor = 1.0;
  double theta = 0.0;  // radians
  BBox gt;             // tight box of the 3-sigma ellipse
};

struct Scene {
  GrayImage image;
  Annotation annotation;
  std::vector<Blob> blobs;
};

// Anisotropic Gaussian blobs at integer centers, composited as
// (1-g)*background + g*intensity over a flat or striped background, plus
// clipped Gaussian noise. Blobs are rejection-sampled so their GT boxes
// (grown by one pixel) never touch; kPlacementFailure after 10,000 tries.
Scene GenerateScene(const SceneSpec& spec);

// Tight half-open box around the 3-sigma ellipse of a blob.
BBox BlobBox(int cx, int cy, double sigma_major, double sigma_minor,
             double theta);

// {"image": "path", "gt": [[x1,y1,x2,y2],...],
//  "detections": [{"id":..,"bbox":[...],"score":..},...]}
std::string AnnotationToJson(const Annotation& annotation);
void SaveAnnotation(const Annotation& annotation,
                    const std::filesystem::path& path);

// Accepts one annotation object or an array of them. Relative image paths
// resolve against the annotation file's directory. Boxes reaching past the
// image are clipped and counted; inverted or empty boxes raise
// kMalformedAnnotation, a missing image kMissingImage.
std::vector<Annotation> LoadAnnotations(const std::filesystem::path& path);

}  // namespace attrefine

#endif  // ATTREFINE_SCENEGEN_H_
