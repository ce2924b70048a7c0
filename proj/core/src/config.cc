// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#include "attrefine/config.h"

#include <nlohmann/json.hpp>

#include "attrefine/error.h"
#include "attrefine/io.h"

namespace attrefine {
namespace {

using nlohmann::json;

json SceneToJson(const SceneSpec& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"blob_count", s.blob_count},
          {"blob_intensity", s.blob_intensity},
          {"blob_sigma_min", s.blob_sigma_min},
          {"blob_sigma_max", s.blob_sigma_max},
          {"background", BackgroundKindName(s.background)},
          {"background_level", s.background_level},
          {"texture_amplitude", s.texture_amplitude},
          {"noise_sigma", s.noise_sigma},
          {"detection_padding", s.detection_padding},
          {"seed", s.seed}};
}

SceneSpec SceneFromJson(const json& j) {
  SceneSpec s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.blob_count = j.at("blob_count").get<int>();
  s.blob_intensity = j.at("blob_intensity").get<double>();
  s.blob_sigma_min = j.at("blob_sigma_min").get<double>();
  s.blob_sigma_max = j.at("blob_sigma_max").get<double>();
  s.background = ParseBackgroundKind(j.at("background").get<std::string>());
  s.background_level = j.at("background_level").get<double>();
  s.texture_amplitude = j.at("texture_amplitude").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.detection_padding = j.at("detection_padding").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

std::string_view MockModeName(MockMode m) {
  switch (m) {
    case MockMode::kEmpty: return "empty";
    case MockMode::kFull: return "full";
    case MockMode::kFixed: return "fixed";
  }
  return "?";
}

MockMode ParseMockMode(std::string_view s) {
  if (s == "empty") return MockMode::kEmpty;
  if (s == "full") return MockMode::kFull;
  if (s == "fixed") return MockMode::kFixed;
  Fail(ErrorCode::kConfigInvalid, "unknown mock_mode '" + std::string(s) + "'");
}

json ToJson(const PipelineConfig& c) {
  json kernels = json::array();
  for (KernelKind k : c.scorer.kernels) kernels.push_back(KernelKindName(k));
  return {
      {"master_seed", c.master_seed},
      {"workers", c.workers},
      {"scorer",
       {{"kernels", kernels},
        {"weights", c.scorer.weights},
        {"stride", c.scorer.stride},
        {"bias", c.scorer.bias},
        {"activation",
         c.scorer.activation == Activation::kRelu ? "relu" : "identity"},
        {"head", c.scorer.head == Head::kSigmoid ? "sigmoid" : "linear"}}},
      {"attribution",
       {{"method", AttributionMethodName(c.attribution.method)},
        {"n_steps", c.attribution.n_steps},
        {"baseline",
         c.attribution.baseline == BaselineKind::kZeros ? "zeros" : "blur"},
        {"blur_sigma", c.attribution.blur_sigma},
        {"top_k", c.attribution.top_k},
        {"min_separation", c.attribution.min_separation}}},
      {"segment",
       {{"backend", c.segment.backend},
        {"tolerance", c.segment.builtin.tolerance},
        {"box_dilation", c.segment.builtin.box_dilation},
        {"normalize_crop", c.segment.builtin.normalize_crop},
        {"endpoint", c.segment.remote.endpoint},
        {"retries", c.segment.remote.retries},
        {"backoff_ms", c.segment.remote.initial_backoff.count()},
        {"timeout_ms", c.segment.remote.timeout.count()},
        {"pool_size", c.segment.remote.pool_size},
        {"mock_mode", MockModeName(c.segment.mock_mode)},
        {"mock_mask", c.segment.mock_mask.generic_string()}}},
      {"refine",
       {{"n_slices", c.refine.n_slices},
        {"area_ratio", c.refine.area_ratio},
        {"score_threshold", c.refine.score_threshold},
        {"iou_threshold", c.refine.iou_threshold},
        {"epsilon", c.refine.epsilon},
        {"jitter_fraction", c.refine.jitter_fraction}}},
      {"scene", SceneToJson(c.scene)},
  };
}

PipelineConfig FromJson(const json& j) {
  PipelineConfig c;
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.workers = j.at("workers").get<int>();

  const json& s = j.at("scorer");
  c.scorer.kernels.clear();
  for (const auto& k : s.at("kernels")) {
    c.scorer.kernels.push_back(ParseKernelKind(k.get<std::string>()));
  }
  c.scorer.weights = s.at("weights").get<std::vector<double>>();
  c.scorer.stride = s.at("stride").get<int>();
  c.scorer.bias = s.at("bias").get<double>();
  const auto activation = s.at("activation").get<std::string>();
  if (activation != "relu" && activation != "identity") {
    Fail(ErrorCode::kConfigInvalid, "scorer.activation must be relu|identity");
  }
  c.scorer.activation =
      activation == "relu" ? Activation::kRelu : Activation::kIdentity;
  const auto head = s.at("head").get<std::string>();
  if (head != "sigmoid" && head != "linear") {
    Fail(ErrorCode::kConfigInvalid, "scorer.head must be sigmoid|linear");
  }
  c.scorer.head = head == "sigmoid" ? Head::kSigmoid : Head::kLinear;

  const json& a = j.at("attribution");
  c.attribution.method = ParseAttributionMethod(a.at("method").get<std::string>());
  c.attribution.n_steps = a.at("n_steps").get<int>();
  const auto baseline = a.at("baseline").get<std::string>();
  if (baseline != "zeros" && baseline != "blur") {
    Fail(ErrorCode::kConfigInvalid, "attribution.baseline must be zeros|blur");
  }
  c.attribution.baseline =
      baseline == "zeros" ? BaselineKind::kZeros : BaselineKind::kBlur;
  c.attribution.blur_sigma = a.at("blur_sigma").get<double>();
  c.attribution.top_k = a.at("top_k").get<int>();
  c.attribution.min_separation = a.at("min_separation").get<int>();

  const json& g = j.at("segment");
  c.segment.backend = g.at("backend").get<std::string>();
  c.segment.builtin.tolerance = g.at("tolerance").get<double>();
  c.segment.builtin.box_dilation = g.at("box_dilation").get<double>();
  c.segment.builtin.normalize_crop = g.at("normalize_crop").get<bool>();
  c.segment.remote.endpoint = g.at("endpoint").get<std::string>();
  c.segment.remote.retries = g.at("retries").get<int>();
  c.segment.remote.initial_backoff =
      std::chrono::milliseconds(g.at("backoff_ms").get<int>());
  c.segment.remote.timeout =
      std::chrono::milliseconds(g.at("timeout_ms").get<int>());
  c.segment.remote.pool_size = g.at("pool_size").get<int>();
  c.segment.remote.box_dilation = c.segment.builtin.box_dilation;
  c.segment.mock_mode = ParseMockMode(g.at("mock_mode").get<std::string>());
  c.segment.mock_mask = g.at("mock_mask").get<std::string>();

  const json& r = j.at("refine");
  c.refine.n_slices = r.at("n_slices").get<int>();
  c.refine.area_ratio = r.at("area_ratio").get<double>();
  c.refine.score_threshold = r.at("score_threshold").get<double>();
  c.refine.iou_threshold = r.at("iou_threshold").get<double>();
  c.refine.epsilon = r.at("epsilon").get<double>();
  c.refine.jitter_fraction = r.at("jitter_fraction").get<double>();
  c.refine.master_seed = c.master_seed;

  c.scene = SceneFromJson(j.at("scene"));
  return c;
}

// Every key of `user` must exist in `reference` (recursively for objects).
void CheckKnownKeys(const json& user, const json& reference,
                    const std::string& prefix) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) {
      Fail(ErrorCode::kConfigInvalid, "unknown config key '" + path + "'");
    }
    if (reference[key].is_object()) {
      if (!value.is_object()) {
        Fail(ErrorCode::kConfigInvalid, "config key '" + path + "' must be an object");
      }
      CheckKnownKeys(value, reference[key], path);
    }
  }
}

void ApplyOverride(json& doc, const json& reference, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    Fail(ErrorCode::kConfigInvalid, "override must look like key=value: " + text);
  }
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  const json* ref = &reference;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!ref->is_object() || !ref->contains(part)) {
      Fail(ErrorCode::kConfigInvalid, "unknown config key '" + key + "'");
    }
    ref = &(*ref)[part];
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

void PipelineConfig::Validate() const {
  if (workers < 1) Fail(ErrorCode::kConfigInvalid, "workers must be >= 1");
  static_cast<void>(ToyScorer{scorer});  // validates kernels/weights/stride
  if (attribution.n_steps < 1) {
    Fail(ErrorCode::kConfigInvalid, "attribution.n_steps must be >= 1");
  }
  if (attribution.top_k < 1 || attribution.min_separation < 0) {
    Fail(ErrorCode::kConfigInvalid, "top_k >= 1 and min_separation >= 0 required");
  }
  if (attribution.baseline == BaselineKind::kBlur &&
      !(attribution.blur_sigma > 0.0)) {
    Fail(ErrorCode::kConfigInvalid, "blur baseline needs blur_sigma > 0");
  }
  if (segment.backend != "builtin" && segment.backend != "mock" &&
      segment.backend != "remote") {
    Fail(ErrorCode::kConfigInvalid,
         "segment.backend must be builtin|mock|remote, got '" +
             segment.backend + "'");
  }
  static_cast<void>(RegionGrowSegmenter{segment.builtin});
  if (segment.backend == "remote" && segment.remote.endpoint.empty()) {
    Fail(ErrorCode::kConfigInvalid, "remote backend needs segment.endpoint");
  }
  if (segment.backend == "mock" && segment.mock_mode == MockMode::kFixed &&
      !std::filesystem::exists(segment.mock_mask)) {
    Fail(ErrorCode::kConfigInvalid,
         "mock mask '" + segment.mock_mask.string() + "' does not exist");
  }
  refine.Validate();
  scene.Validate();
}

std::string DefaultConfigJson() { return ToJson(PipelineConfig{}).dump(2); }

PipelineConfig LoadConfig(std::string_view json_text,
                          const std::vector<std::string>& overrides) {
  const json reference = ToJson(PipelineConfig{});
  json doc = reference;
  try {
    if (!json_text.empty()) {
      const json user = json::parse(json_text);
      if (!user.is_object()) {
        Fail(ErrorCode::kConfigInvalid, "config must be a JSON object");
      }
      CheckKnownKeys(user, reference, "");
      doc.merge_patch(user);
    }
    for (const auto& o : overrides) ApplyOverride(doc, reference, o);
    PipelineConfig config = FromJson(doc);
    config.Validate();
    return config;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfigInvalid, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigInvalid) throw;
    Fail(ErrorCode::kConfigInvalid, e.what());
  }
}

PipelineConfig LoadConfigFile(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorCode::kConfigInvalid, "config file " + path.string() + " not found");
  }
  return LoadConfig(ReadFile(path), overrides);
}

std::string ConfigToJson(const PipelineConfig& config) {
  return ToJson(config).dump(2);
}

SceneBatch LoadSceneBatch(std::string_view json_text) {
  try {
    json user = json::parse(json_text);
    if (!user.is_object()) {
      Fail(ErrorCode::kConfigInvalid, "scene spec must be a JSON object");
    }
    SceneBatch batch;
    if (user.contains("scenes")) {
      batch.scenes = user["scenes"].get<int>();
      user.erase("scenes");
    }
    const json reference = SceneToJson(SceneSpec{});
    CheckKnownKeys(user, reference, "");
    json doc = reference;
    doc.merge_patch(user);
    batch.spec = SceneFromJson(doc);
    batch.spec.Validate();
    if (batch.scenes < 1) Fail(ErrorCode::kConfigInvalid, "scenes must be >= 1");
    return batch;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfigInvalid, e.what());
  }
}

std::unique_ptr<SegmenterBackend> MakeBackend(const SegmentConfig& config) {
  if (config.backend == "builtin") {
    return std::make_unique<RegionGrowSegmenter>(config.builtin);
  }
  if (config.backend == "remote") {
    return std::make_unique<RemoteSegmenter>(config.remote);
  }
  if (config.backend == "mock") {
    switch (config.mock_mode) {
      case MockMode::kEmpty: return MockSegmenter::Empty();
      case MockMode::kFull: return MockSegmenter::Full();
      case MockMode::kFixed: return MockSegmenter::Fixed(ReadMask(config.mock_mask));
    }
  }
  Fail(ErrorCode::kConfigInvalid, "unknown backend '" + config.backend + "'");
}

}  // namespace attrefine
