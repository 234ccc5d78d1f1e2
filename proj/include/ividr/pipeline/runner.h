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

#ifndef IVIDR_PIPELINE_RUNNER_H_
#define IVIDR_PIPELINE_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ividr/eval/report.h"
#include "ividr/pipeline/config.h"

namespace ividr::pipeline {

using numerics::Matrix;

// Git-describe style identifier baked in at configure time.
const char* build_id();

// Everything a cell needs from one seed's dataset.
struct PreparedData {
  int n_users = 0;
  int n_items = 0;
  datasets::DataSplit split;
  // Binary training exposure X (biased train triples only).
  Matrix exposure;
  Matrix user_features;
  std::vector<int> proxy;
  int n_proxy_categories = 0;
  std::optional<Matrix> truth_c;
  std::unique_ptr<recmodel::ExampleSampler> sampler;
  std::vector<eval::UserItemLabel> validation;
  std::vector<eval::UserItemLabel> test;
};

// Loads or generates the data of `seed` (synthetic data is regenerated with
// the seed; file data keeps its contents and only the split carve follows
// the seed).
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

// Per-seed cache of the shared pipeline stages. Not thread-safe; one
// context belongs to one worker.
class SeedContext {
 public:
  SeedContext(const ExperimentConfig& cfg, std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  const PreparedData& data() const { return data_; }

  // C2: iVAE over the raw exposure rows.
  const ivae::GaussianPosterior& raw_posterior();
  const iv::IvResult& iv_result(iv::Combination mode);
  // C1: iVAE over X^re rows, mapped into the frame of C2.
  const ivae::GaussianPosterior& debiased_posterior(iv::Combination mode);
  // nullopt for MF. iDCF-baseline is (C2, ρ=1, τ=0).
  std::optional<ivae::FusedConfounder> fused(recmodel::Variant v, double rho, double tau);
  // MCC of the fused posterior mean against ground truth (synthetic only).
  std::optional<double> mcc(recmodel::Variant v, double rho, double tau);
  // Which stages ran, for wiring checks.
  bool iv_stage_ran() const { return !iv_.empty(); }
  const std::map<std::string, double>& timings() const { return timings_; }

 private:
  const ExperimentConfig& cfg_;
  std::uint64_t seed_;
  PreparedData data_;
  std::optional<ivae::GaussianPosterior> raw_;
  std::map<iv::Combination, iv::IvResult> iv_;
  std::map<iv::Combination, ivae::GaussianPosterior> debiased_;
  std::map<std::string, double> timings_;
};

struct CellResult {
  std::uint64_t seed = 0;
  std::string variant;
  bool ok = false;
  std::string error;
  double ndcg = 0.0;
  double recall = 0.0;
  std::optional<double> mcc;
  double validation_ndcg = 0.0;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  int best_epoch = -1;

  nlohmann::ordered_json to_json() const;
  static CellResult from_json(const nlohmann::json& j);
};

// Trains and evaluates one (seed, variant) cell. Failures are captured in
// the result, never thrown.
CellResult run_cell(SeedContext& ctx, recmodel::Variant variant, const ExperimentConfig& cfg);

struct RunOptions {
  std::filesystem::path run_dir;
  int jobs = 1;
  // Reuse finished cells found under run_dir.
  bool resume = false;
  std::string command = "run";
  // Print one line per finished cell to stderr.
  bool verbose = false;
};

struct RunSummary {
  eval::MetricsReport report;
  std::vector<CellResult> cells;
  bool all_ok = true;
};

// seeds × variants grid; writes cells/, report.json, metrics.csv.
RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

struct SweepPoint {
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  double ndcg = 0.0;
  double recall = 0.0;
};

struct SweepSummary {
  std::vector<SweepPoint> points;
  bool all_ok = true;
  std::vector<std::string> errors;
};

// ρ and τ series for IViDR (the other weight held at its configured value);
// the optimizer cell is chosen once per seed at the configured (ρ, τ).
// Writes sweep.csv, sweep_<axis>.csv and report.json.
SweepSummary run_sweep(const ExperimentConfig& cfg, const RunOptions& opts);

struct MccRow {
  double gamma = 0.0;
  std::string variant;
  std::uint64_t seed = 0;
  double mcc = 0.0;
};

struct MccSummary {
  std::vector<MccRow> rows;
  bool all_ok = true;
  std::vector<std::string> errors;

  // Mean MCC of `variant` at `gamma` over seeds.
  double mean(const std::string& variant, double gamma) const;
};

// iDCF-baseline and IViDR confounder recovery per γ and seed (synthetic
// sources only). Writes mcc.csv, mcc_vs_gamma.csv and report.json.
MccSummary run_mcc_study(const ExperimentConfig& cfg, const RunOptions& opts);

// "<root>/<command>-YYYYmmdd-HHMMSS[-n]", created.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& command);

// Writes `body` prefixed by "# build_id=..." and "# config=..." lines.
void write_csv_with_provenance(const std::filesystem::path& path, const ExperimentConfig& cfg, const std::string& body);
void write_json_with_provenance(const std::filesystem::path& path, const ExperimentConfig& cfg,
                                const std::string& command, nlohmann::ordered_json body);

}  // namespace ividr::pipeline

#endif  // IVIDR_PIPELINE_RUNNER_H_
