// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_CONFIG_H_
#define ATTREFINE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "attrefine/attribution.h"
#include "attrefine/refine.h"
#include "attrefine/remote_segmenter.h"
#include "attrefine/scenegen.h"
#include "attrefine/segment.h"
#include "attrefine/toy_scorer.h"

namespace attrefine {

struct AttributionConfig {
  AttributionMethod method = AttributionMethod::kIntegratedGradients;
  int n_steps = 30;
  BaselineKind baseline = BaselineKind::kZeros;
  double blur_sigma = 2.0;
  int top_k = 20;
  int min_separation = 1;
};

enum class MockMode { kEmpty, kFull, kFixed };

struct SegmentConfig {
  // "builtin", "mock" or "remote"; exactly one backend is active.
  std::string backend = "builtin";
  RegionGrowOptions builtin;
  RemoteSegmenterOptions remote;
  MockMode mock_mode = MockMode::kEmpty;
  std::filesystem::path mock_mask;  // MockMode::kFixed only
};

// One human-editable JSON document covering every stage. Unknown keys are
// rejected so that typos in experiment bundles fail loudly.
struct PipelineConfig {
  std::uint64_t master_seed = 0;
  int workers = 1;
  ToyScorerOptions scorer;
  AttributionConfig attribution;
  SegmentConfig segment;
  RefineConfig refine;
  SceneSpec scene;

  // Throws kConfigInvalid.
  void Validate() const;
};

// Defaults as a JSON document (also the reference for accepted keys).
std::string DefaultConfigJson();

// Builds a config from the defaults, an optional JSON document and a list of
// "dotted.key=value" overrides (values parsed as JSON, else taken as strings).
PipelineConfig LoadConfig(std::string_view json_text,
                          const std::vector<std::string>& overrides = {});
PipelineConfig LoadConfigFile(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});
std::string ConfigToJson(const PipelineConfig& config);

// Scene spec document for `gen`: the SceneSpec fields plus an optional
// "scenes" count (seeds seed, seed+1, ...).
struct SceneBatch {
  SceneSpec spec;
  int scenes = 1;
};
SceneBatch LoadSceneBatch(std::string_view json_text);

std::unique_ptr<SegmenterBackend> MakeBackend(const SegmentConfig& config);

}  // namespace attrefine

#endif  // ATTREFINE_CONFIG_H_
