// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_PIPELINE_H_
#define ATTREFINE_PIPELINE_H_

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attrefine/attribution.h"
#include "attrefine/config.h"
#include "attrefine/refine.h"
#include "attrefine/scenegen.h"

namespace attrefine {

// Runs fn(i) for every i in [0, count) on up to `workers` threads. If any
// call throws, the failure with the lowest index is rethrown after all
// workers stop.
void ParallelFor(int count, int workers, const std::function<void(int)>& fn);

// Collects a command's outputs in a hidden staging directory under `out_dir`
// and moves them into place on Commit(). Without a commit the staging
// directory is removed, so a failed run leaves no partial files behind.
class OutputStage {
 public:
  explicit OutputStage(std::filesystem::path out_dir);
  ~OutputStage();
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  // Staging location for `relative`; parent directories are created.
  std::filesystem::path Path(const std::filesystem::path& relative);
  // Final location of `relative` after commit.
  std::filesystem::path Final(const std::filesystem::path& relative) const;
  void Commit();

 private:
  std::filesystem::path out_dir_;
  std::filesystem::path staging_;
  std::vector<std::filesystem::path> files_;
  bool committed_ = false;
  bool created_out_dir_ = false;
};

struct ImageInput {
  std::string name;  // file stem, used in reports and output paths
  GrayImage image;
  Annotation annotation;
};

// Loads every annotated image, or only `image_override` (which also replaces
// the image path when the file holds a single annotation).
std::vector<ImageInput> LoadInputs(
    const std::filesystem::path& annotations,
    const std::optional<std::filesystem::path>& image_override);

// Annotated detections, or the GT boxes (ids 0..n-1) when none are given.
std::vector<Detection> DetectionsFor(const Annotation& annotation);

// Best-IoU GT box for a detection; falls back to the detection's own box
// (second = true) when no GT box overlaps it.
std::pair<BBox, bool> MatchReference(const Detection& det,
                                     std::span<const BBox> gt_boxes);

struct AttributedInstance {
  Detection det;
  AttributionMap map;
  std::vector<AttributionPoint> points;
};

AttributionMap ComputeAttribution(const PipelineConfig& config,
                                  const ToyScorer& scorer,
                                  const GrayImage& image, const Detection& det,
                                  AttributionMethod method);

std::vector<AttributedInstance> AttributeImage(const PipelineConfig& config,
                                               const GrayImage& image,
                                               std::span<const Detection> dets,
                                               AttributionMethod method);

struct ImageRefinement {
  std::string name;
  std::vector<InstanceResult> instances;  // sorted by instance id
};

ImageRefinement RefineImage(const PipelineConfig& config,
                            const ImageInput& input,
                            std::span<const AttributedInstance> attributed,
                            const SegmenterBackend& backend);

// image,instance_id,rank,x,y,value,mask_iou,mask_score,iou_norm,score_norm,
// retained,n_slices,seed. Metric fields are empty for degenerate records.
std::string ReportCsv(std::span<const ImageRefinement> runs,
                      const PipelineConfig& config);

// Original intensities with the boundary of every retained EM set to 1.0.
GrayImage Overlay(const GrayImage& image, const ImageRefinement& run);

// Subcommands. Each validates its inputs, stages outputs and commits them
// only when everything succeeded; failures propagate as attrefine::Error.
void CmdGen(const std::filesystem::path& spec_file,
            const std::filesystem::path& out_dir, std::ostream& log);

void CmdAttribute(const PipelineConfig& config,
                  const std::filesystem::path& annotations,
                  const std::optional<std::filesystem::path>& image,
                  const std::filesystem::path& out_dir, std::ostream& log);

void CmdRefine(const PipelineConfig& config,
               const std::filesystem::path& annotations,
               const std::optional<std::filesystem::path>& image,
               const std::optional<std::filesystem::path>& maps_dir,
               const std::filesystem::path& out_dir, std::ostream& log);

struct SweepRequest {
  std::vector<int> n_values = {1, 2, 5, 10, 15, 20};
  std::vector<int> ranks = {1, 10, 20};
  int repeats = 30;
  // Without annotations the sweep runs on the config's synthetic scene.
  std::optional<std::filesystem::path> annotations;
  std::optional<std::filesystem::path> image;
  std::optional<int> instance_id;  // default: first detection
};

void CmdSweep(const PipelineConfig& config, const SweepRequest& request,
              const std::filesystem::path& out_csv, std::ostream& log);

// Prints MaskIoU and MaskScore of a mask against a box.
void CmdScore(const std::filesystem::path& image,
              const std::filesystem::path& mask, const BBox& gt,
              double epsilon, std::ostream& out);

}  // namespace attrefine

#endif  // ATTREFINE_PIPELINE_H_
