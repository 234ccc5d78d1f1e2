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

#ifndef IVIDR_RECMODEL_IVIDR_MODEL_H_
#define IVIDR_RECMODEL_IVIDR_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ividr/eval/ranking.h"
#include "ividr/iv/reconstruction.h"
#include "ividr/ivae/ivae.h"
#include "ividr/numerics/adam.h"
#include "ividr/numerics/mlp.h"
#include "ividr/recmodel/examples.h"
#include "ividr/recmodel/mf.h"
#include "json.hpp"

namespace ividr::recmodel {

using numerics::Matrix;
using numerics::Vector;

enum class Variant {
  kIViDR,
  // Raw MLP_0(T) in place of T^re.
  kIViDRT,
  // Fitted part only.
  kIViDRF,
  // Residual part only.
  kIViDRR,
  kMF,
  // Single iVAE on raw exposure, no IV stage.
  kIDCF,
};

std::string_view variant_name(Variant v);
// Accepts the display names ("IViDR-F", "iDCF-baseline", ...) case-insensitively.
// Throws ConfigError for anything else.
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

bool uses_iv_stage(Variant v);
bool uses_confounder(Variant v);
// Combination mode of the IV stage for variants that run it.
iv::Combination combination_for(Variant v);

struct HeadConfig {
  // false: cᵀ e_Ci. true: MLP over (c ⊕ e_Ci).
  bool mlp = false;
  int hidden = 16;
};

class ConfounderHead {
 public:
  ConfounderHead() = default;
  ConfounderHead(int n_items, int latent_dim, const HeadConfig& cfg, numerics::Rng& rng);

  int latent_dim() const { return latent_dim_; }
  std::span<const double> item_embedding(int i) const;
  double score(std::span<const double> c, int i) const;
  // Adds g · ∂score/∂θ to the parameter gradients.
  void accumulate_grad(std::span<const double> c, int i, double g);
  numerics::ParameterList parameters();

  numerics::Parameter embeddings;
  numerics::Mlp mlp;

 private:
  Vector mlp_input(std::span<const double> c, int i) const;

  int n_items_ = 0;
  int latent_dim_ = 0;
  bool use_mlp_ = false;
};

class IviDrModel {
 public:
  IviDrModel() = default;
  // MF factors come from `mf_rng`, head parameters from `head_rng`, so a
  // φ = 0 model and a plain MF model with the same `mf_rng` start equal.
  IviDrModel(Variant variant, int n_users, int n_items, int dim, int latent_dim, double phi, double lambda,
             const HeadConfig& head, numerics::Rng& mf_rng, numerics::Rng& head_rng);

  Variant variant() const { return variant_; }
  double phi() const { return phi_; }
  double lambda() const { return lambda_; }

  double mf_score(int u, int i) const { return mf.score(u, i); }
  double confounder_score(std::span<const double> c, int i) const;
  double logit(int u, int i, std::span<const double> c) const;
  double predict(int u, int i, std::span<const double> c) const;

  // Mean BCE over `batch`; one fused-confounder draw per example from
  // `sample_rng`. `fused` may be null only when φ = 0 or the variant has no
  // confounder path.
  double loss_and_grad(std::span<const Example> batch, const ivae::FusedConfounder* fused,
                       numerics::Rng& sample_rng);

  numerics::ParameterList parameters();

  MfModel mf;
  ConfounderHead head;

 private:
  bool confounded() const { return uses_confounder(variant_) && phi_ != 0.0; }

  Variant variant_ = Variant::kMF;
  double phi_ = 0.0;
  double lambda_ = 1.0;
};

struct RecTrainConfig {
  int dim = 16;
  int epochs = 30;
  std::size_t batch_size = 256;
  int negatives = 4;
  std::vector<double> learning_rates{1e-3, 5e-4, 1e-4, 5e-5, 1e-5};
  std::vector<double> weight_decays{1e-5, 1e-6};
  double phi = 1.0;
  double lambda = 1.0;
  HeadConfig head;
  std::size_t k = 5;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct GridCell {
  double learning_rate;
  double weight_decay;
  double validation_ndcg;
  int best_epoch;
};

struct RecTrainResult {
  IviDrModel model;
  GridCell chosen;
  std::vector<GridCell> grid;
};

// Trains one grid cell: Adam for cfg.epochs epochs, keeping the parameters
// of the epoch with the best validation NDCG@k (scored with fused means).
RecTrainResult train_cell(Variant variant, const ExampleSampler& sampler, std::span<const eval::UserItemLabel> validation,
                          const ivae::FusedConfounder* fused, const RecTrainConfig& cfg, double learning_rate,
                          double weight_decay);

// Full grid search over learning rate × weight decay.
RecTrainResult train_recmodel(Variant variant, const ExampleSampler& sampler,
                              std::span<const eval::UserItemLabel> validation, const ivae::FusedConfounder* fused,
                              const RecTrainConfig& cfg);

// Evaluation scorer: fused posterior means stand in for C.
eval::ScoreFn scorer(const IviDrModel& model, const ivae::FusedConfounder* fused);

void save_model(const IviDrModel& model, const std::filesystem::path& prefix, const nlohmann::ordered_json& extra);

}  // namespace ividr::recmodel

#endif  // IVIDR_RECMODEL_IVIDR_MODEL_H_
