// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

// attrefine: attribution refinement for tiny-object detections.
//
//   attrefine gen       --spec scene.json --out DIR
//   attrefine attribute --annotations ann.json [--image img] --out DIR
//   attrefine refine    --annotations ann.json [--image img] [--maps DIR] --out DIR
//   attrefine sweep     [--annotations ann.json] --n 2,10 --ranks 1,10,20 --repeats 30 --out sweep.csv
//   attrefine score     --image img --mask em.json --gt x1,y1,x2,y2
//
// Global flags: --config FILE, --seed N, --workers N,
//   --backend builtin|mock|remote, --endpoint URL, --set key=value

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attrefine/config.h"
#include "attrefine/error.h"
#include "attrefine/pipeline.h"

namespace {

namespace fs = std::filesystem;

std::vector<int> ParseIntList(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

attrefine::BBox ParseBox(const std::string& text) {
  const auto v = ParseIntList(text);
  if (v.size() != 4) {
    attrefine::Fail(attrefine::ErrorCode::kInvalidArgument,
                    "--gt expects x1,y1,x2,y2");
  }
  return attrefine::BBox::Make(v[0], v[1], v[2], v[3]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-guided refinement of per-detection attribution maps"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> backend;
  std::optional<std::string> endpoint;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Pipeline config JSON")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workers", workers, "Worker threads");
  app.add_option("--backend", backend, "Segmenter backend")
      ->check(CLI::IsMember({"builtin", "mock", "remote"}));
  app.add_option("--endpoint", endpoint, "Remote segmenter URL");
  app.add_option("--set", sets, "Config override key=value (repeatable)");

  std::string out;
  std::string annotations;
  std::string image;
  std::string maps;

  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes");
  std::string spec_file;
  gen->add_option("--spec", spec_file, "Scene spec JSON")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* attribute = app.add_subcommand("attribute", "Compute attribution maps");
  std::string method;
  attribute->add_option("--annotations", annotations)->required();
  attribute->add_option("--image", image);
  attribute->add_option("--method", method)
      ->check(CLI::IsMember({"ig", "gradcam"}));
  attribute->add_option("--out", out)->required();

  auto* refine = app.add_subcommand("refine", "Refine attribution maps");
  refine->add_option("--annotations", annotations)->required();
  refine->add_option("--image", image);
  refine->add_option("--maps", maps, "Directory of precomputed SODT maps");
  refine->add_option("--method", method)
      ->check(CLI::IsMember({"ig", "gradcam"}));
  refine->add_option("--out", out)->required();

  auto* sweep = app.add_subcommand("sweep", "Slice-count sensitivity sweep");
  std::string n_list = "1,2,5,10,15,20";
  std::string rank_list = "1,10,20";
  int repeats = 30;
  std::optional<int> instance;
  sweep->add_option("--n", n_list, "Comma-separated slice counts");
  sweep->add_option("--ranks", rank_list, "Comma-separated point ranks");
  sweep->add_option("--repeats", repeats);
  sweep->add_option("--annotations", annotations);
  sweep->add_option("--image", image);
  sweep->add_option("--instance", instance);
  sweep->add_option("--out", out, "Output CSV")->required();

  auto* score = app.add_subcommand("score", "Print MaskIoU and MaskScore");
  std::string mask;
  std::string gt;
  score->add_option("--image", image)->required();
  score->add_option("--mask", mask)->required();
  score->add_option("--gt", gt, "x1,y1,x2,y2")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      attrefine::CmdGen(spec_file, out, std::cerr);
      return 0;
    }

    std::vector<std::string> overrides = sets;
    if (seed) overrides.push_back("master_seed=" + std::to_string(*seed));
    if (workers) overrides.push_back("workers=" + std::to_string(*workers));
    if (backend) overrides.push_back("segment.backend=\"" + *backend + "\"");
    if (endpoint) overrides.push_back("segment.endpoint=\"" + *endpoint + "\"");
    if (!method.empty()) {
      overrides.push_back("attribution.method=\"" + method + "\"");
    }
    const attrefine::PipelineConfig config =
        config_path.empty() ? attrefine::LoadConfig("", overrides)
                            : attrefine::LoadConfigFile(config_path, overrides);

    auto optional_path = [](const std::string& s) -> std::optional<fs::path> {
      if (s.empty()) return std::nullopt;
      return fs::path(s);
    };

    if (attribute->parsed()) {
      attrefine::CmdAttribute(config, annotations, optional_path(image), out,
                              std::cerr);
    } else if (refine->parsed()) {
      attrefine::CmdRefine(config, annotations, optional_path(image),
                           optional_path(maps), out, std::cerr);
    } else if (sweep->parsed()) {
      attrefine::SweepRequest request;
      request.n_values = ParseIntList(n_list);
      request.ranks = ParseIntList(rank_list);
      request.repeats = repeats;
      request.annotations = optional_path(annotations);
      request.image = optional_path(image);
      request.instance_id = instance;
      attrefine::CmdSweep(config, request, out, std::cerr);
    } else if (score->parsed()) {
      attrefine::CmdScore(image, mask, ParseBox(gt), config.refine.epsilon,
                          std::cout);
    }
  } catch (const attrefine::Error& e) {
    std::cerr << "attrefine: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "attrefine: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
