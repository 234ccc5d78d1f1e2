/*
 * Copyright 2026 The IViDR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IVIDR_PIPELINE_CONFIG_H_
#define IVIDR_PIPELINE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ividr/datagen/generator.h"
#include "ividr/datasets/loaders.h"
#include "ividr/datasets/preprocess.h"
#include "ividr/iv/reconstruction.h"
#include "ividr/ivae/ivae.h"
#include "ividr/recmodel/ividr_model.h"
#include "json.hpp"

namespace ividr::pipeline {

enum class SourceKind {
  kSynthetic,
  // Directory written by `generate`.
  kBundle,
  // Coat-format directory (train.ascii / test.ascii / user features).
  kCoat,
  // TSV triples or a dense matrix file.
  kFile,
};

struct DataConfig {
  SourceKind source = SourceKind::kSynthetic;
  // Synthetic settings; the seed is replaced by the cell seed.
  datagen::GenConfig synthetic = datagen::preset("desk");
  std::string preset = "desk";
  std::filesystem::path path;
  datasets::InputFormat format = datasets::InputFormat::kTsvTriples;
  datasets::ProxyRule proxy;
  int positive_threshold = 4;
  double validation_fraction = 0.1;
};

struct SweepAxis {
  double start = 0.0;
  double stop = 1.0;
  double step = 0.2;

  // start, start + step, ... up to stop (inclusive, within 1e-9).
  std::vector<double> points() const;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<recmodel::Variant> variants{recmodel::Variant::kMF, recmodel::Variant::kIViDR};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double rho = 0.9;
  double tau = 0.9;
  std::size_t k = 5;
  iv::IvConfig iv;
  ivae::IvaeConfig ivae;
  recmodel::RecTrainConfig rec;
  SweepAxis rho_sweep;
  SweepAxis tau_sweep;
  std::vector<double> gammas{0, 5, 10, 15, 20};
  std::string baseline = "MF";

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Parses an INI file (sections [data], [experiment], [iv], [ivae],
// [recmodel], [sweep]). Unknown sections or keys are ConfigErrors.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

// Applies one "section.key=value" override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Defaults for a named synthetic preset (desk, paper, coat).
ExperimentConfig preset_config(const std::string& preset);

// "0:1:0.2" → axis. Throws ConfigError on malformed input.
SweepAxis parse_axis(const std::string& text);
std::vector<std::uint64_t> parse_seeds(const std::string& text);

}  // namespace ividr::pipeline

#endif  // IVIDR_PIPELINE_CONFIG_H_
