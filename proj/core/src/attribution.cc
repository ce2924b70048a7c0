// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/attribution.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attrefine/error.h"
#include "attrefine/io.h"

namespace attrefine {
namespace {

void CheckBox(const Detection& det, int width, int height) {
  if (!det.bbox.InsideImage(width, height)) {
    std::ostringstream os;
    os << "detection " << det.instance_id << " box " << det.bbox
       << " outside " << width << "x" << height << " image";
    Fail(ErrorCode::kBoxOutOfBounds, os.str());
  }
}

AttributionMap EmptyMap(const Detection& det, int width, int height,
                        AttributionMethod method) {
  AttributionMap map;
  map.instance_id = det.instance_id;
  map.box = det.bbox;
  map.values = Tensor({height, width});
  map.method = method;
  return map;
}

}  // namespace

std::string_view AttributionMethodName(AttributionMethod method) {
  switch (method) {
    case AttributionMethod::kIntegratedGradients: return "ig";
    case AttributionMethod::kGradCam: return "gradcam";
    case AttributionMethod::kExternal: return "external";
  }
  return "?";
}

AttributionMethod ParseAttributionMethod(std::string_view name) {
  if (name == "ig") return AttributionMethod::kIntegratedGradients;
  if (name == "gradcam") return AttributionMethod::kGradCam;
  if (name == "external") return AttributionMethod::kExternal;
  Fail(ErrorCode::kConfigInvalid,
       "unknown attribution method '" + std::string(name) + "'");
}

GrayImage MakeBaseline(const GrayImage& image, BaselineKind kind,
                       double blur_sigma) {
  if (kind == BaselineKind::kZeros) {
    return GrayImage(image.width(), image.height(), 0.0);
  }
  return GaussianBlur(image, blur_sigma);
}

AttributionMap IntegratedGradients(const ToyScorer& scorer,
                                   const GrayImage& image,
                                   const GrayImage& baseline,
                                   const Detection& det, int n_steps) {
  if (!image.SameShape(baseline)) {
    Fail(ErrorCode::kShapeMismatch, "baseline and image differ in shape");
  }
  if (n_steps < 1) Fail(ErrorCode::kInvalidArgument, "n_steps must be >= 1");
  const int w = image.width();
  const int h = image.height();
  CheckBox(det, w, h);

  const auto input = image.data();
  const auto base = baseline.data();
  std::vector<double> point(input.size());
  std::vector<double> grad_sum(input.size(), 0.0);
  for (int t = 1; t <= n_steps; ++t) {
    const double alpha = (t - 0.5) / n_steps;
    for (std::size_t i = 0; i < point.size(); ++i) {
      point[i] = base[i] + alpha * (input[i] - base[i]);
    }
    const ScorerTrace trace = scorer.Score(point, w, h, det.bbox);
    const auto g = trace.input_grad.data();
    for (std::size_t i = 0; i < grad_sum.size(); ++i) grad_sum[i] += g[i];
  }

  AttributionMap map =
      EmptyMap(det, w, h, AttributionMethod::kIntegratedGradients);
  for (int y = det.bbox.y_min; y < det.bbox.y_max; ++y) {
    for (int x = det.bbox.x_min; x < det.bbox.x_max; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      map.values.at(y, x) =
          static_cast<float>((input[i] - base[i]) * (grad_sum[i] / n_steps));
    }
  }
  return map;
}

double BilinearAt(std::span<const double> plane, int fw, int fh, int stride,
                  int x, int y) {
  const double fx = std::clamp(static_cast<double>(x) / stride, 0.0,
                               static_cast<double>(fw - 1));
  const double fy = std::clamp(static_cast<double>(y) / stride, 0.0,
                               static_cast<double>(fh - 1));
  const int j0 = static_cast<int>(fx);
  const int i0 = static_cast<int>(fy);
  const int j1 = std::min(j0 + 1, fw - 1);
  const int i1 = std::min(i0 + 1, fh - 1);
  const double wx = fx - j0;
  const double wy = fy - i0;
  auto v = [&](int i, int j) {
    return plane[static_cast<std::size_t>(i) * fw + j];
  };
  return (1.0 - wy) * ((1.0 - wx) * v(i0, j0) + wx * v(i0, j1)) +
         wy * ((1.0 - wx) * v(i1, j0) + wx * v(i1, j1));
}

AttributionMap GradCam(const ScorerTrace& trace, const Detection& det,
                       int image_width, int image_height) {
  const auto& shape = trace.features.shape();
  if (shape.size() != 3 || trace.feature_grads.shape() != shape) {
    Fail(ErrorCode::kShapeMismatch, "trace feature tensors must be [K,H,W]");
  }
  CheckBox(det, image_width, image_height);
  const int num_k = static_cast<int>(shape[0]);
  const int fh = static_cast<int>(shape[1]);
  const int fw = static_cast<int>(shape[2]);
  const int s = trace.stride;
  if (fh < 1 || fw < 1) Fail(ErrorCode::kEmptyFootprint, "empty feature grid");

  const BBox fp{(det.bbox.x_min + s - 1) / s, (det.bbox.y_min + s - 1) / s,
                std::min((det.bbox.x_max + s - 1) / s, fw),
                std::min((det.bbox.y_max + s - 1) / s, fh)};
  if (!fp.Valid()) {
    Fail(ErrorCode::kEmptyFootprint, "detection box has no feature cells");
  }
  const double z_count = static_cast<double>(fp.Area());

  const std::size_t plane_size = static_cast<std::size_t>(fh) * fw;
  const auto features = trace.features.data();
  const auto grads = trace.feature_grads.data();

  std::vector<double> cam(plane_size, 0.0);
  for (int k = 0; k < num_k; ++k) {
    const auto grad_plane = grads.subspan(k * plane_size, plane_size);
    double alpha = 0.0;
    for (int i = fp.y_min; i < fp.y_max; ++i) {
      for (int j = fp.x_min; j < fp.x_max; ++j) {
        alpha += grad_plane[static_cast<std::size_t>(i) * fw + j];
      }
    }
    alpha /= z_count;
    const auto feature_plane = features.subspan(k * plane_size, plane_size);
    std::transform(cam.begin(), cam.end(), feature_plane.begin(), cam.begin(),
                   [alpha](double acc, float a) { return acc + alpha * a; });
  }
  for (double& v : cam) v = std::max(v, 0.0);

  AttributionMap map =
      EmptyMap(det, image_width, image_height, AttributionMethod::kGradCam);
  for (int y = det.bbox.y_min; y < det.bbox.y_max; ++y) {
    for (int x = det.bbox.x_min; x < det.bbox.x_max; ++x) {
      map.values.at(y, x) =
          static_cast<float>(BilinearAt(cam, fw, fh, s, x, y));
    }
  }
  return map;
}

std::vector<AttributionPoint> ExtractPoints(const AttributionMap& map,
                                            int top_k, int min_separation) {
  if (top_k < 1) Fail(ErrorCode::kInvalidArgument, "top_k must be >= 1");
  if (min_separation < 0) {
    Fail(ErrorCode::kInvalidArgument, "min_separation must be >= 0");
  }
  struct Candidate {
    double magnitude;
    int y;
    int x;
  };
  std::vector<Candidate> candidates;
  const auto clipped = ClipToImage(map.box, map.width(), map.height());
  if (!clipped) return {};
  for (int y = clipped->y_min; y < clipped->y_max; ++y) {
    for (int x = clipped->x_min; x < clipped->x_max; ++x) {
      const double v = map.values.at(y, x);
      if (v != 0.0) candidates.push_back({std::abs(v), y, x});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });

  std::vector<AttributionPoint> points;
  for (const Candidate& c : candidates) {
    if (static_cast<int>(points.size()) >= top_k) break;
    const Point p{c.x, c.y};
    const bool suppressed =
        std::any_of(points.begin(), points.end(), [&](const AttributionPoint& q) {
          return ChebyshevDistance(p, Point{q.x, q.y}) <= min_separation;
        });
    if (suppressed) continue;
    points.push_back({c.x, c.y, map.values.at(c.y, c.x),
                      static_cast<int>(points.size()) + 1});
  }
  return points;
}

AttributionMap ExternalMapFromTensor(Tensor tensor, const Detection& det,
                                     int image_width, int image_height) {
  const auto& shape = tensor.shape();
  if (shape.size() != 2 || shape[0] != image_height || shape[1] != image_width) {
    std::ostringstream os;
    os << "external map shape [";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      os << (i ? "," : "") << shape[i];
    }
    os << "] does not match image [" << image_height << "," << image_width
       << "]";
    Fail(ErrorCode::kShapeMismatch, os.str());
  }
  CheckBox(det, image_width, image_height);
  AttributionMap map;
  map.instance_id = det.instance_id;
  map.box = det.bbox;
  map.method = AttributionMethod::kExternal;
  map.values = std::move(tensor);
  for (int y = 0; y < image_height; ++y) {
    for (int x = 0; x < image_width; ++x) {
      if (!det.bbox.Contains(x, y)) map.values.at(y, x) = 0.0f;
    }
  }
  return map;
}

AttributionMap LoadExternalMap(const std::filesystem::path& path,
                               const Detection& det, int image_width,
                               int image_height) {
  return ExternalMapFromTensor(ReadTensor(path), det, image_width,
                               image_height);
}

std::string PointsToJson(const std::vector<AttributionPoint>& points) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : points) {
    arr.push_back({{"x", p.x}, {"y", p.y}, {"value", p.value}, {"rank", p.rank}});
  }
  return arr.dump();
}

std::vector<AttributionPoint> PointsFromJson(std::string_view text) {
  std::vector<AttributionPoint> points;
  try {
    for (const auto& p : nlohmann::json::parse(text)) {
      points.push_back({p.at("x").get<int>(), p.at("y").get<int>(),
                        p.at("value").get<double>(), p.at("rank").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidArgument, std::string("points json: ") + e.what());
  }
  return points;
}

MapEnergy ComputeEnergy(const AttributionMap& map, const BBox& region) {
  MapEnergy e;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const double v = std::abs(static_cast<double>(map.values.at(y, x)));
      e.total += v;
      if (!region.Contains(x, y)) e.outside += v;
    }
  }
  return e;
}

}  // namespace attrefine
