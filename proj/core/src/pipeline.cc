// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/pipeline.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "attrefine/error.h"
#include "attrefine/io.h"

namespace attrefine {
namespace fs = std::filesystem;

void ParallelFor(int count, int workers, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int threads = std::clamp(workers, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  int failed_index = count;
  std::exception_ptr failure;
  auto worker = [&] {
    while (!failed.load()) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// --- OutputStage ------------------------------------------------------------

OutputStage::OutputStage(fs::path out_dir) : out_dir_(std::move(out_dir)) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  created_out_dir_ = !fs::exists(out_dir_);
  fs::create_directories(out_dir_, ec);
  if (ec) Fail(ErrorCode::kIoError, "cannot create " + out_dir_.string());
  staging_ = out_dir_ / (".staging-" + std::to_string(::getpid()) + "-" +
                         std::to_string(counter.fetch_add(1)));
  fs::create_directories(staging_, ec);
  if (ec) Fail(ErrorCode::kIoError, "cannot create " + staging_.string());
}

OutputStage::~OutputStage() {
  std::error_code ec;
  fs::remove_all(staging_, ec);
  // fs::remove only deletes an empty directory.
  if (!committed_ && created_out_dir_) fs::remove(out_dir_, ec);
}

fs::path OutputStage::Path(const fs::path& relative) {
  if (committed_) Fail(ErrorCode::kIoError, "output stage already committed");
  const fs::path p = staging_ / relative;
  fs::create_directories(p.parent_path());
  if (std::find(files_.begin(), files_.end(), relative) == files_.end()) {
    files_.push_back(relative);
  }
  return p;
}

fs::path OutputStage::Final(const fs::path& relative) const {
  return out_dir_ / relative;
}

void OutputStage::Commit() {
  for (const auto& rel : files_) {
    const fs::path src = staging_ / rel;
    if (!fs::exists(src)) {
      Fail(ErrorCode::kIoError, "declared output " + rel.string() + " missing");
    }
  }
  for (const auto& rel : files_) {
    const fs::path dst = out_dir_ / rel;
    fs::create_directories(dst.parent_path());
    fs::rename(staging_ / rel, dst);
  }
  committed_ = true;
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

// --- Inputs -------------------------------------------------------------------

std::vector<ImageInput> LoadInputs(const fs::path& annotations,
                                   const std::optional<fs::path>& image_override) {
  std::vector<Annotation> all = LoadAnnotations(annotations);
  std::vector<ImageInput> inputs;
  if (image_override) {
    if (!fs::exists(*image_override)) {
      Fail(ErrorCode::kMissingImage, image_override->string());
    }
    const Annotation* chosen = nullptr;
    if (all.size() == 1) {
      chosen = &all.front();
    } else {
      for (const auto& a : all) {
        if (a.image_path.filename() == image_override->filename()) chosen = &a;
      }
    }
    if (!chosen) {
      Fail(ErrorCode::kMissingImage,
           "no annotation entry for " + image_override->string());
    }
    Annotation a = *chosen;
    a.image_path = *image_override;
    all = {a};
  }
  for (auto& a : all) {
    ImageInput in;
    in.name = a.image_path.stem().string();
    in.image = ReadImage(a.image_path);
    in.annotation = std::move(a);
    for (const auto& d : DetectionsFor(in.annotation)) {
      if (!d.bbox.InsideImage(in.image.width(), in.image.height())) {
        Fail(ErrorCode::kMalformedAnnotation, "detection outside image");
      }
    }
    inputs.push_back(std::move(in));
  }
  std::set<std::string> names;
  for (const auto& in : inputs) {
    if (!names.insert(in.name).second) {
      Fail(ErrorCode::kMalformedAnnotation, "duplicate image name " + in.name);
    }
  }
  return inputs;
}

std::vector<Detection> DetectionsFor(const Annotation& annotation) {
  if (!annotation.detections.empty()) return annotation.detections;
  std::vector<Detection> dets;
  for (std::size_t i = 0; i < annotation.gt_boxes.size(); ++i) {
    dets.push_back({static_cast<int>(i), annotation.gt_boxes[i], 1.0, 0});
  }
  return dets;
}

std::pair<BBox, bool> MatchReference(const Detection& det,
                                     std::span<const BBox> gt_boxes) {
  double best = 0.0;
  const BBox* match = nullptr;
  for (const auto& gt : gt_boxes) {
    const double iou = BoxIou(det.bbox, gt);
    if (iou > best) {
      best = iou;
      match = &gt;
    }
  }
  if (!match) return {det.bbox, true};
  return {*match, false};
}

// --- Attribution / refinement -------------------------------------------------

AttributionMap ComputeAttribution(const PipelineConfig& config,
                                  const ToyScorer& scorer,
                                  const GrayImage& image, const Detection& det,
                                  AttributionMethod method) {
  switch (method) {
    case AttributionMethod::kIntegratedGradients: {
      const GrayImage baseline = MakeBaseline(
          image, config.attribution.baseline, config.attribution.blur_sigma);
      return IntegratedGradients(scorer, image, baseline, det,
                                 config.attribution.n_steps);
    }
    case AttributionMethod::kGradCam:
      return GradCam(scorer.Score(image, det.bbox), det, image.width(),
                     image.height());
    case AttributionMethod::kExternal:
      break;
  }
  Fail(ErrorCode::kConfigInvalid,
       "external maps are loaded with --maps, not computed");
}

std::vector<AttributedInstance> AttributeImage(const PipelineConfig& config,
                                               const GrayImage& image,
                                               std::span<const Detection> dets,
                                               AttributionMethod method) {
  const ToyScorer scorer(config.scorer);
  std::vector<AttributedInstance> out(dets.size());
  ParallelFor(static_cast<int>(dets.size()), config.workers, [&](int i) {
    AttributedInstance& inst = out[i];
    inst.det = dets[i];
    inst.map = ComputeAttribution(config, scorer, image, dets[i], method);
    inst.points = ExtractPoints(inst.map, config.attribution.top_k,
                                config.attribution.min_separation);
  });
  return out;
}

ImageRefinement RefineImage(const PipelineConfig& config,
                            const ImageInput& input,
                            std::span<const AttributedInstance> attributed,
                            const SegmenterBackend& backend) {
  ImageRefinement run;
  run.name = input.name;
  run.instances.resize(attributed.size());
  ParallelFor(static_cast<int>(attributed.size()), config.workers, [&](int i) {
    const AttributedInstance& inst = attributed[i];
    const auto [reference, is_prediction] =
        MatchReference(inst.det, input.annotation.gt_boxes);
    run.instances[i] =
        RefineInstance(input.image, inst.det, reference, is_prediction,
                       inst.map, inst.points, backend, config.refine);
  });
  std::sort(run.instances.begin(), run.instances.end(),
            [](const InstanceResult& a, const InstanceResult& b) {
              return a.instance_id < b.instance_id;
            });
  return run;
}

std::string ReportCsv(std::span<const ImageRefinement> runs,
                      const PipelineConfig& config) {
  std::string out =
      "image,instance_id,rank,x,y,value,mask_iou,mask_score,iou_norm,"
      "score_norm,retained,n_slices,seed\n";
  char buf[1024];
  for (const auto& run : runs) {
    for (const auto& inst : run.instances) {
      for (const auto& r : inst.records) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%d,%.17g,", run.name.c_str(),
                      inst.instance_id, r.point.rank, r.point.x, r.point.y,
                      r.point.value);
        out += buf;
        if (r.degenerate) {
          out += ",,,,";
        } else {
          std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,",
                        r.mask_iou, r.mask_score, r.iou_norm, r.score_norm);
          out += buf;
        }
        std::snprintf(buf, sizeof(buf), "%d,%d,%llu\n", r.retained ? 1 : 0,
                      config.refine.n_slices,
                      static_cast<unsigned long long>(config.master_seed));
        out += buf;
      }
    }
  }
  return out;
}

GrayImage Overlay(const GrayImage& image, const ImageRefinement& run) {
  BinaryMask keep(image.width(), image.height());
  for (const auto& inst : run.instances) {
    for (const auto& r : inst.records) {
      if (r.retained) keep = keep.Or(r.em);
    }
  }
  const auto edge = MaskBoundary(keep).ToDense();
  std::vector<double> pixels(image.data().begin(), image.data().end());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (edge[i]) pixels[i] = 1.0;
  }
  return GrayImage(image.width(), image.height(), std::move(pixels));
}

// --- Commands -----------------------------------------------------------------

void CmdGen(const fs::path& spec_file, const fs::path& out_dir,
            std::ostream& log) {
  if (!fs::exists(spec_file)) {
    Fail(ErrorCode::kConfigInvalid, "scene spec " + spec_file.string() + " not found");
  }
  const SceneBatch batch = LoadSceneBatch(ReadFile(spec_file));
  OutputStage stage(out_dir);
  std::vector<Scene> scenes(batch.scenes);
  for (int i = 0; i < batch.scenes; ++i) {
    SceneSpec spec = batch.spec;
    spec.seed = batch.spec.seed + static_cast<std::uint64_t>(i);
    scenes[i] = GenerateScene(spec);
  }
  nlohmann::json index = nlohmann::json::array();
  for (int i = 0; i < batch.scenes; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%03d", i);
    const std::string png = std::string(stem) + ".png";
    WritePng(scenes[i].image, stage.Path(png));
    Annotation a = scenes[i].annotation;
    a.image_path = png;
    SaveAnnotation(a, stage.Path(std::string(stem) + ".json"));
    index.push_back(nlohmann::json::parse(AnnotationToJson(a)));
    log << "generated " << png << " with " << a.gt_boxes.size() << " blobs\n";
  }
  WriteFileAtomic(stage.Path("annotations.json"), index.dump(2) + "\n");
  stage.Commit();
}

void CmdAttribute(const PipelineConfig& config, const fs::path& annotations,
                  const std::optional<fs::path>& image, const fs::path& out_dir,
                  std::ostream& log) {
  const auto inputs = LoadInputs(annotations, image);
  OutputStage stage(out_dir);
  for (const auto& in : inputs) {
    const auto dets = DetectionsFor(in.annotation);
    const auto attributed =
        AttributeImage(config, in.image, dets, config.attribution.method);
    for (const auto& inst : attributed) {
      const std::string id = std::to_string(inst.det.instance_id);
      WriteTensor(inst.map.values, stage.Path(fs::path(in.name) / ("map_" + id + ".sodt")));
      WriteFileAtomic(stage.Path(fs::path(in.name) / ("points_" + id + ".json")),
                      PointsToJson(inst.points) + "\n");
    }
    log << in.name << ": " << attributed.size() << " "
        << AttributionMethodName(config.attribution.method) << " maps\n";
  }
  stage.Commit();
}

void CmdRefine(const PipelineConfig& config, const fs::path& annotations,
               const std::optional<fs::path>& image,
               const std::optional<fs::path>& maps_dir, const fs::path& out_dir,
               std::ostream& log) {
  const auto inputs = LoadInputs(annotations, image);
  const auto backend = MakeBackend(config.segment);
  OutputStage stage(out_dir);

  std::vector<ImageRefinement> runs;
  for (const auto& in : inputs) {
    const auto dets = DetectionsFor(in.annotation);
    std::vector<AttributedInstance> attributed;
    if (maps_dir) {
      for (const auto& det : dets) {
        AttributedInstance inst;
        inst.det = det;
        const fs::path map_path = *maps_dir / in.name /
                                  ("map_" + std::to_string(det.instance_id) + ".sodt");
        if (!fs::exists(map_path)) {
          Fail(ErrorCode::kIoError, "missing attribution map " + map_path.string());
        }
        inst.map = LoadExternalMap(map_path, det, in.image.width(), in.image.height());
        inst.points = ExtractPoints(inst.map, config.attribution.top_k,
                                    config.attribution.min_separation);
        attributed.push_back(std::move(inst));
      }
    } else {
      attributed = AttributeImage(config, in.image, dets, config.attribution.method);
    }

    ImageRefinement run = RefineImage(config, in, attributed, *backend);

    nlohmann::json summary_instances = nlohmann::json::array();
    for (const auto& inst : run.instances) {
      const fs::path dir(in.name);
      const std::string id = std::to_string(inst.instance_id);
      WriteTensor(inst.refined.values, stage.Path(dir / ("refined_" + id + ".sodt")));
      int retained = 0;
      int degenerate = 0;
      for (const auto& r : inst.records) {
        WriteMask(r.em, stage.Path(dir / ("em_" + id + "_r" +
                                          std::to_string(r.point.rank) + ".json")));
        retained += r.retained ? 1 : 0;
        degenerate += r.degenerate ? 1 : 0;
      }
      if (inst.reference_is_prediction) {
        log << "warning: " << in.name << " instance " << id
            << " has no matching GT box; metrics use the predicted box\n";
      }
      if (!inst.records.empty() && degenerate == static_cast<int>(inst.records.size())) {
        log << "warning: " << in.name << " instance " << id
            << ": every enhanced mask is degenerate; refined map is empty\n";
      }
      const BBox& ref = inst.reference_box;
      summary_instances.push_back(
          {{"instance_id", inst.instance_id},
           {"reference", inst.reference_is_prediction ? "prediction" : "annotation"},
           {"reference_box", {ref.x_min, ref.y_min, ref.x_max, ref.y_max}},
           {"points", inst.records.size()},
           {"retained", retained},
           {"degenerate", degenerate}});
    }
    WritePgm(Overlay(in.image, run), stage.Path(fs::path(in.name) / "overlay.pgm"));
    nlohmann::json summary = {{"image", in.name},
                              {"backend", backend->name()},
                              {"clipped_boxes", in.annotation.clipped_boxes},
                              {"instances", summary_instances}};
    WriteFileAtomic(stage.Path(fs::path(in.name) / "summary.json"),
                    summary.dump(2) + "\n");
    runs.push_back(std::move(run));
  }
  WriteFileAtomic(stage.Path("report.csv"), ReportCsv(runs, config));
  stage.Commit();
  log << "wrote " << stage.Final("report.csv").string() << "\n";
}

void CmdSweep(const PipelineConfig& config, const SweepRequest& request,
              const fs::path& out_csv, std::ostream& log) {
  ImageInput input;
  if (request.annotations) {
    auto inputs = LoadInputs(*request.annotations, request.image);
    input = std::move(inputs.front());
  } else {
    Scene scene = GenerateScene(config.scene);
    input.name = "synthetic";
    input.image = std::move(scene.image);
    input.annotation = std::move(scene.annotation);
  }
  const auto dets = DetectionsFor(input.annotation);
  if (dets.empty()) Fail(ErrorCode::kInvalidArgument, "scene has no detections");
  const Detection* det = &dets.front();
  if (request.instance_id) {
    const auto it = std::find_if(dets.begin(), dets.end(), [&](const Detection& d) {
      return d.instance_id == *request.instance_id;
    });
    if (it == dets.end()) {
      Fail(ErrorCode::kInvalidArgument,
           "no detection with id " + std::to_string(*request.instance_id));
    }
    det = &*it;
  }
  const ToyScorer scorer(config.scorer);
  const AttributionMap map = ComputeAttribution(config, scorer, input.image, *det,
                                                config.attribution.method);
  const auto points = ExtractPoints(map, config.attribution.top_k,
                                    config.attribution.min_separation);
  const auto [reference, is_prediction] =
      MatchReference(*det, input.annotation.gt_boxes);
  if (is_prediction) log << "warning: sweep metrics use the predicted box\n";
  const auto backend = MakeBackend(config.segment);
  const auto rows = NSweep(input.image, *det, reference, points, *backend,
                           config.refine, request.n_values, request.ranks,
                           request.repeats);
  for (int rank : request.ranks) {
    if (rank > static_cast<int>(points.size())) {
      log << "warning: InsufficientPoints: rank " << rank << " requested, instance has "
          << points.size() << " points\n";
    }
  }
  if (!out_csv.parent_path().empty()) fs::create_directories(out_csv.parent_path());
  WriteFileAtomic(out_csv, SweepToCsv(rows));
  log << "wrote " << out_csv.string() << "\n";
}

void CmdScore(const fs::path& image, const fs::path& mask, const BBox& gt,
              double epsilon, std::ostream& out) {
  const GrayImage img = ReadImage(image);
  const BinaryMask em = ReadMask(mask);
  if (em.width() != img.width() || em.height() != img.height()) {
    Fail(ErrorCode::kShapeMismatch, "mask and image dimensions differ");
  }
  if (!gt.Valid()) Fail(ErrorCode::kInvalidArgument, "invalid GT box");
  const MaskScoreTerms t = MaskScoreDetailed(img, em, gt, epsilon);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "MaskIoU=%.10g\nMaskScore=%.10g\n"
                "core_mean=%.10g core_var=%.10g bg_mean=%.10g bg_var=%.10g "
                "overflow=%lld lambda=%.10g bg_fallback=%d\n",
                MaskIou(em, gt), t.score, t.core_mean, t.core_var, t.bg_mean,
                t.bg_var, static_cast<long long>(t.overflow), t.lambda,
                t.bg_fallback ? 1 : 0);
  out << buf;
}

}  // namespace attrefine
