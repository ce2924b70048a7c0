// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/scenegen.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attrefine/error.h"
#include "attrefine/io.h"
#include "attrefine/rng.h"

namespace attrefine {
namespace {

constexpr int kMaxPlacementAttempts = 10000;

struct StripeField {
  double cos_phi;
  double sin_phi;
  double period;
  double phase;
};

double StripeTexture(const std::vector<StripeField>& fields, int x, int y) {
  double acc = 0.0;
  for (const auto& f : fields) {
    const double t = 2.0 * std::numbers::pi * (x * f.cos_phi + y * f.sin_phi) /
                         f.period +
                     f.phase;
    // Sharpened sinusoid: near-binary traces with soft edges.
    acc += 0.5 * (1.0 + std::tanh(4.0 * std::sin(t)));
  }
  return acc / static_cast<double>(fields.size());
}

BBox ParseBoxJson(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) {
    Fail(ErrorCode::kMalformedAnnotation, "box must be [x1,y1,x2,y2]");
  }
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

BBox RepairBox(const BBox& box, int width, int height, int& clipped) {
  if (!box.Valid()) {
    std::ostringstream os;
    os << "non-positive area box " << box;
    Fail(ErrorCode::kMalformedAnnotation, os.str());
  }
  const auto inside = ClipToImage(box, width, height);
  if (!inside) {
    std::ostringstream os;
    os << box << " lies entirely outside the " << width << "x" << height
       << " image";
    Fail(ErrorCode::kMalformedAnnotation, os.str());
  }
  if (!(*inside == box)) ++clipped;
  return *inside;
}

Annotation ParseAnnotation(const nlohmann::json& j,
                           const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("image") || !j["image"].is_string()) {
    Fail(ErrorCode::kMalformedAnnotation, "annotation needs an image path");
  }
  Annotation a;
  a.image_path = j["image"].get<std::string>();
  if (a.image_path.is_relative()) a.image_path = base_dir / a.image_path;
  if (!std::filesystem::exists(a.image_path)) {
    Fail(ErrorCode::kMissingImage, a.image_path.string());
  }
  const auto [width, height] = ReadImageSize(a.image_path);
  if (j.contains("gt")) {
    for (const auto& b : j["gt"]) {
      a.gt_boxes.push_back(RepairBox(ParseBoxJson(b), width, height,
                                     a.clipped_boxes));
    }
  }
  if (j.contains("detections")) {
    for (const auto& d : j["detections"]) {
      Detection det;
      det.instance_id = d.at("id").get<int>();
      det.bbox = RepairBox(ParseBoxJson(d.at("bbox")), width, height,
                           a.clipped_boxes);
      det.confidence = d.value("score", 1.0);
      det.class_id = d.value("class", 0);
      if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
        Fail(ErrorCode::kMalformedAnnotation, "detection score outside [0,1]");
      }
      for (const auto& other : a.detections) {
        if (other.instance_id == det.instance_id) {
          Fail(ErrorCode::kMalformedAnnotation,
               "duplicate detection id " + std::to_string(det.instance_id));
        }
      }
      a.detections.push_back(det);
    }
  }
  return a;
}

}  // namespace

BackgroundKind ParseBackgroundKind(std::string_view name) {
  if (name == "flat") return BackgroundKind::kFlat;
  if (name == "circuit") return BackgroundKind::kCircuit;
  Fail(ErrorCode::kConfigInvalid, "unknown background '" + std::string(name) + "'");
}

std::string_view BackgroundKindName(BackgroundKind kind) {
  return kind == BackgroundKind::kFlat ? "flat" : "circuit";
}

void SceneSpec::Validate() const {
  if (width < 4 || height < 4) {
    Fail(ErrorCode::kConfigInvalid, "scene must be at least 4x4");
  }
  if (blob_count < 0) Fail(ErrorCode::kConfigInvalid, "blob_count < 0");
  if (!(blob_sigma_min > 0.0 && blob_sigma_max >= blob_sigma_min)) {
    Fail(ErrorCode::kConfigInvalid, "need 0 < blob_sigma_min <= blob_sigma_max");
  }
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(blob_intensity) || !unit(background_level) ||
      !unit(texture_amplitude)) {
    Fail(ErrorCode::kConfigInvalid, "intensities must lie in [0,1]");
  }
  if (!(noise_sigma >= 0.0)) Fail(ErrorCode::kConfigInvalid, "noise_sigma < 0");
  if (detection_padding < 0) {
    Fail(ErrorCode::kConfigInvalid, "detection_padding < 0");
  }
}

BBox BlobBox(int cx, int cy, double sigma_major, double sigma_minor,
             double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double ex = 3.0 * std::sqrt(sigma_major * sigma_major * c * c +
                                    sigma_minor * sigma_minor * s * s);
  const double ey = 3.0 * std::sqrt(sigma_major * sigma_major * s * s +
                                    sigma_minor * sigma_minor * c * c);
  return {static_cast<int>(std::floor(cx - ex)),
          static_cast<int>(std::floor(cy - ey)),
          static_cast<int>(std::floor(cx + ex)) + 1,
          static_cast<int>(std::floor(cy + ey)) + 1};
}

Scene GenerateScene(const SceneSpec& spec) {
  spec.Validate();
  Rng rng(DeriveSeed({spec.seed, 0x5ce7e}));

  // Blob placement.
  std::vector<Blob> blobs;
  for (int b = 0; b < spec.blob_count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      Blob blob;
      const double s1 = rng.Uniform(spec.blob_sigma_min, spec.blob_sigma_max);
      const double s2 = rng.Uniform(spec.blob_sigma_min, spec.blob_sigma_max);
      blob.sigma_major = std::max(s1, s2);
      blob.sigma_minor = std::min(s1, s2);
      blob.theta = rng.Uniform(0.0, std::numbers::pi);
      blob.cx = rng.UniformInt(0, spec.width - 1);
      blob.cy = rng.UniformInt(0, spec.height - 1);
      blob.gt = BlobBox(blob.cx, blob.cy, blob.sigma_major, blob.sigma_minor,
                        blob.theta);
      if (!blob.gt.InsideImage(spec.width, spec.height)) continue;
      const BBox grown{blob.gt.x_min - 1, blob.gt.y_min - 1, blob.gt.x_max + 1,
                       blob.gt.y_max + 1};
      bool clash = false;
      for (const auto& other : blobs) {
        if (Intersect(grown, other.gt)) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      blobs.push_back(blob);
      placed = true;
    }
    if (!placed) {
      Fail(ErrorCode::kPlacementFailure,
           "could not place blob " + std::to_string(b) + " after " +
               std::to_string(kMaxPlacementAttempts) + " attempts");
    }
  }

  // Background.
  std::vector<StripeField> fields;
  if (spec.background == BackgroundKind::kCircuit) {
    const int count = rng.UniformInt(2, 4);
    for (int i = 0; i < count; ++i) {
      // Axis-aligned traces dominate circuit boards; allow some diagonals.
      const double phi = rng.UniformInt(0, 3) * std::numbers::pi / 4.0;
      fields.push_back({std::cos(phi), std::sin(phi), rng.Uniform(6.0, 16.0),
                        rng.Uniform(0.0, 2.0 * std::numbers::pi)});
    }
  }

  const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
  std::vector<double> pixels(n);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double v = spec.background_level;
      if (!fields.empty()) {
        v += spec.texture_amplitude * StripeTexture(fields, x, y);
      }
      pixels[static_cast<std::size_t>(y) * spec.width + x] = v;
    }
  }

  for (const auto& blob : blobs) {
    const double c = std::cos(blob.theta);
    const double s = std::sin(blob.theta);
    for (int y = blob.gt.y_min; y < blob.gt.y_max; ++y) {
      for (int x = blob.gt.x_min; x < blob.gt.x_max; ++x) {
        const double dx = x - blob.cx;
        const double dy = y - blob.cy;
        const double u = dx * c + dy * s;
        const double v = -dx * s + dy * c;
        const double g = std::exp(-0.5 * (u * u / (blob.sigma_major * blob.sigma_major) +
                                          v * v / (blob.sigma_minor * blob.sigma_minor)));
        double& p = pixels[static_cast<std::size_t>(y) * spec.width + x];
        p = (1.0 - g) * p + g * spec.blob_intensity;
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (double& p : pixels) p += rng.Normal(0.0, spec.noise_sigma);
  }
  for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);

  Scene scene;
  scene.image = GrayImage(spec.width, spec.height, std::move(pixels));
  scene.blobs = blobs;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    scene.annotation.gt_boxes.push_back(blobs[i].gt);
    const int pad = spec.detection_padding;
    const BBox det_box = *ClipToImage(
        BBox{blobs[i].gt.x_min - pad, blobs[i].gt.y_min - pad,
             blobs[i].gt.x_max + pad, blobs[i].gt.y_max + pad},
        spec.width, spec.height);
    scene.annotation.detections.push_back(
        Detection{static_cast<int>(i), det_box, 1.0, 0});
  }
  return scene;
}

std::string AnnotationToJson(const Annotation& annotation) {
  nlohmann::json gt = nlohmann::json::array();
  for (const auto& b : annotation.gt_boxes) {
    gt.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  }
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : annotation.detections) {
    dets.push_back({{"id", d.instance_id},
                    {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                    {"score", d.confidence},
                    {"class", d.class_id}});
  }
  nlohmann::json j = {{"image", annotation.image_path.generic_string()},
                      {"gt", gt},
                      {"detections", dets}};
  return j.dump(2);
}

void SaveAnnotation(const Annotation& annotation,
                    const std::filesystem::path& path) {
  WriteFileAtomic(path, AnnotationToJson(annotation) + "\n");
}

std::vector<Annotation> LoadAnnotations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorCode::kIoError, "annotation file " + path.string() + " not found");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformedAnnotation, e.what());
  }
  const auto base = path.parent_path();
  std::vector<Annotation> out;
  try {
    if (j.is_array()) {
      for (const auto& item : j) out.push_back(ParseAnnotation(item, base));
    } else {
      out.push_back(ParseAnnotation(j, base));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformedAnnotation, e.what());
  }
  return out;
}

}  // namespace attrefine
