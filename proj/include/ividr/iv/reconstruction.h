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

#ifndef IVIDR_IV_RECONSTRUCTION_H_
#define IVIDR_IV_RECONSTRUCTION_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ividr/numerics/adam.h"
#include "ividr/numerics/linalg.h"
#include "ividr/numerics/matrix.h"
#include "ividr/numerics/mlp.h"
#include "ividr/numerics/rng.h"
#include "ividr/recmodel/examples.h"
#include "json.hpp"

namespace ividr::iv {

using numerics::Matrix;
using numerics::Mlp;
using numerics::Vector;

// How fitted and residual parts are recombined into T^re.
enum class Combination {
  // α¹, α² from MLP_1 / MLP_2.
  kLearned,
  // α = (1, 1): T^re = MLP_0(T), the untouched treatment.
  kTreatment,
  // α = (1, 0): fitted part only.
  kFittedOnly,
  // α = (0, 1): residual part only.
  kResidualOnly,
};

const char* combination_name(Combination c);

struct IvConfig {
  // d_i = d_q.
  int embedding_dim = 16;
  int hidden = 64;
  // Column cap of Z_j.
  int n_max = 64;
  // Global scale s of the X adjustment.
  double scale = 1.0;
  double pinv_tolerance = numerics::kDefaultPinvTolerance;
  int warm_start_epochs = 5;
  int epochs = 10;
  std::size_t batch_size = 1024;
  numerics::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 1e-6};
  int negatives = 4;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// {T_j : j ∈ I_u ∪ {i}} with I_u taken from the training split.
struct Treatment {
  std::vector<int> items;  // ascending, no duplicates
  Matrix embeddings;       // row k is T of items[k]
};

Treatment build_treatment(const std::vector<std::vector<int>>& train_items_by_user, const Matrix& item_embeddings,
                          int u, int i);

// Z_j: d_q × N feature embeddings of the users who interacted with j.
struct IvMatrix {
  Matrix z;
  std::vector<int> users;
};

// nullopt when j has no interacting users (the item is excluded from
// decomposition). More than n_max users are subsampled uniformly with a
// stream keyed by (seed, user set), so identical user sets give identical
// matrices.
std::optional<IvMatrix> build_iv_matrix(const std::vector<std::vector<int>>& users_by_item,
                                        const Matrix& user_feature_embeddings, int j, int n_max, std::uint64_t seed);

// Column mean of Z_j (length d_q).
Vector pool_columns(const Matrix& z);

// Fixed seeded Gaussian projection of raw user features to d_q dimensions,
// scaled by 1/sqrt(d_f).
Matrix feature_embedding(const Matrix& features, int d_q, std::uint64_t seed);

struct Decomposition {
  Vector transformed;  // MLP_0(T_j)
  Vector fitted;       // Z_j Z_j⁺ MLP_0(T_j)
  Vector residual;     // MLP_0(T_j) − fitted
};

Decomposition decompose(std::span<const double> t_j, const Matrix& z_j, const Mlp& mlp0,
                        double tol = numerics::kDefaultPinvTolerance);

struct Combined {
  Vector t_re;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

// α¹ = MLP_1([MLP_0(T_j), pool(Z_j)]), α² = MLP_2(same); forced modes
// override the networks.
Combined combine(const Decomposition& d, std::span<const double> pool, const Mlp& mlp1, const Mlp& mlp2,
                 Combination mode);

// X^re = X + s · adjustment_j on the observed entries (X_uj ≠ 0) only, so
// the sparsity pattern of X is preserved.
Matrix debias_interactions(const Matrix& x, std::span<const double> item_adjustment, double scale);

// MLP_0/1/2 plus a linear head and a small MF scorer, trained end-to-end on
// BCE with score p_uᵀ T^re_i + k_u + k_i + g + s · headᵀ T^re_i. The warm
// start item embeddings T are frozen and the projectors are constants.
class Reconstructor {
 public:
  Reconstructor(int n_users, const Matrix& item_embeddings, const Matrix& user_feature_embeddings,
                const std::vector<std::vector<int>>& users_by_item, const IvConfig& cfg, Combination mode,
                numerics::Rng& rng);

  int n_users() const { return n_users_; }
  int n_items() const { return static_cast<int>(items_.size()); }
  Combination mode() const { return mode_; }

  bool has_iv(int j) const { return items_[static_cast<std::size_t>(j)].has_iv; }
  int iv_users(int j) const { return items_[static_cast<std::size_t>(j)].n_users; }
  const Matrix& projector(int j) const { return items_[static_cast<std::size_t>(j)].projector; }

  Decomposition decomposition(int j) const;
  Combined reconstruct(int j) const;
  // headᵀ T^re_j.
  double item_adjustment(int j) const;
  double score(int u, int i) const;

  // Mean BCE over `batch`; adds its gradient to every parameter.
  double loss_and_grad(std::span<const recmodel::Example> batch);
  // Epoch-mean losses.
  std::vector<double> train(const recmodel::ExampleSampler& sampler, numerics::Rng& rng);

  numerics::ParameterList parameters();

  Mlp mlp0;
  Mlp mlp1;
  Mlp mlp2;
  numerics::Parameter head;
  numerics::Parameter user_factors;
  numerics::Parameter user_bias;
  numerics::Parameter item_bias;
  numerics::Parameter global_bias;

 private:
  struct ItemData {
    Vector treatment;
    Matrix projector;  // d_q × d_q, zero when excluded
    Vector pool;
    bool has_iv = false;
    int n_users = 0;
  };

  Vector mlp_input(const Vector& transformed, const Vector& pool) const;

  int n_users_;
  int dim_;
  IvConfig cfg_;
  Combination mode_;
  std::vector<ItemData> items_;
};

struct IvItemReport {
  int item = 0;
  bool excluded = false;
  int n_users = 0;
  double fitted_norm = 0.0;
  double residual_norm = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double adjustment = 0.0;
};

struct IvResult {
  Combination mode = Combination::kLearned;
  Matrix x_re;
  std::vector<double> adjustment;
  std::vector<IvItemReport> items;
  std::vector<double> loss_history;
};

// Full stage: MF warm start → feature embedding → reconstruction training →
// X^re. `x` is the n_users × n_items training exposure matrix and
// `user_features` the (standardized) raw features.
IvResult run_iv_stage(const Matrix& x, const recmodel::ExampleSampler& sampler, const Matrix& user_features,
                      const IvConfig& cfg, Combination mode);

// Row-major little-endian float64 dump.
void write_x_re(const std::filesystem::path& path, const Matrix& x_re);
Matrix read_x_re(const std::filesystem::path& path, std::size_t rows, std::size_t cols);
void write_iv_report(const std::filesystem::path& path, const IvResult& result, const IvConfig& cfg);

}  // namespace ividr::iv

#endif  // IVIDR_IV_RECONSTRUCTION_H_
