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

#ifndef IVIDR_IVAE_IVAE_H_
#define IVIDR_IVAE_IVAE_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ividr/numerics/adam.h"
#include "ividr/numerics/matrix.h"
#include "ividr/numerics/mlp.h"
#include "ividr/numerics/rng.h"
#include "json.hpp"

namespace ividr::ivae {

using numerics::Matrix;
using numerics::Mlp;
using numerics::Vector;

enum class Likelihood {
  // Independent Bernoulli over items (exposure vectors).
  kBernoulli,
  // Independent Gaussian with fixed variance (continuous toy data).
  kGaussian,
};

inline constexpr double kProbabilityClamp = 1e-7;

struct IvaeConfig {
  int latent_dim = 2;
  int encoder_hidden = 64;
  // 0 gives a linear decoder.
  int decoder_hidden = 64;
  Likelihood likelihood = Likelihood::kBernoulli;
  double gaussian_variance = 0.01;
  std::size_t batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  // Share of users held out for validation ELBO.
  double holdout_fraction = 0.2;
  numerics::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 0.0};
  // Log-variances are clamped to this range before exponentiation.
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct DiagGaussian {
  Vector mean;
  Vector var;
};

// Per-user posterior moments, n_users × latent_dim each.
struct GaussianPosterior {
  Matrix mean;
  Matrix var;
};

// q(C | A, W) = N(encoder([row, onehot(W)])), p(C | W) = N(table[W]),
// p(A | C) = decoder(C).
class IvaeModel {
 public:
  IvaeModel() = default;
  IvaeModel(int n_inputs, int n_outputs, int n_categories, const IvaeConfig& cfg, numerics::Rng& rng);

  int n_inputs() const { return n_inputs_; }
  int n_outputs() const { return n_outputs_; }
  int n_categories() const { return n_categories_; }
  int latent_dim() const { return latent_dim_; }
  const IvaeConfig& config() const { return cfg_; }

  bool known_category(int w) const { return w >= 0 && w < n_categories_; }
  // Lookup-table prior; categories never seen in training fall back to
  // N(0, I).
  DiagGaussian prior_params(int w) const;
  DiagGaussian encode(std::span<const double> row, int w) const;
  // Decoder pre-activations (logits for Bernoulli, means for Gaussian).
  Vector decode_raw(std::span<const double> c) const;
  // Bernoulli means clamped to [ε, 1 − ε], or Gaussian means.
  Vector decode(std::span<const double> c) const;
  // log p(target | c).
  double log_likelihood(std::span<const double> target, std::span<const double> c) const;
  // One-sample reparameterized ELBO of one user.
  double elbo(std::span<const double> row, std::span<const double> target, int w, numerics::Rng& rng) const;

  // Mean negative ELBO over `users` (rows of inputs/targets); adds the
  // gradient to every parameter. One reparameterized sample per user.
  double loss_and_grad(std::span<const std::size_t> users, const Matrix& inputs, const Matrix& targets,
                       const std::vector<int>& w, numerics::Rng& rng);

  numerics::ParameterList parameters();

  Mlp encoder;
  Mlp decoder;
  numerics::Parameter prior_mean;
  numerics::Parameter prior_logvar;

 private:
  Vector encoder_input(std::span<const double> row, int w) const;
  double clamp_logvar(double v) const;

  int n_inputs_ = 0;
  int n_outputs_ = 0;
  int n_categories_ = 0;
  int latent_dim_ = 0;
  IvaeConfig cfg_;
};

struct IvaeTrainResult {
  IvaeModel model;
  std::vector<double> train_elbo;
  std::vector<double> validation_elbo;
  int best_epoch = -1;
  double best_validation_elbo = 0.0;
};

// Maximizes the mean ELBO with Adam on mini-batches of users and keeps the
// parameters of the best validation epoch. `inputs` feed the encoder and
// `targets` are reconstructed by the decoder; both are n_users × n_items.
// Throws NumericError if the ELBO becomes non-finite.
IvaeTrainResult train_ivae(const Matrix& inputs, const Matrix& targets, const std::vector<int>& w, int n_categories,
                           const IvaeConfig& cfg);

// Deterministic mean ELBO with per-user noise streams keyed by `seed`.
double mean_elbo(const IvaeModel& model, std::span<const std::size_t> users, const Matrix& inputs,
                 const Matrix& targets, const std::vector<int>& w, std::uint64_t seed);

GaussianPosterior posterior(const IvaeModel& model, const Matrix& inputs, const std::vector<int>& w);

// C = ρ C₁ + τ C₂.
// Maps `source` into the coordinate frame of `target` with the least-squares
// affine map μ_t ≈ Aᵀ μ_s + b fitted over all rows. Variances follow the
// diagonal of Aᵀ diag(v) A. Latents are only identified up to such maps, so
// two posteriors need a shared frame before they are fused.
GaussianPosterior align_posterior(const GaussianPosterior& source, const GaussianPosterior& target);

class FusedConfounder {
 public:
  FusedConfounder(GaussianPosterior first, GaussianPosterior second, double rho, double tau);

  double rho() const { return rho_; }
  double tau() const { return tau_; }
  std::size_t users() const { return mean_.rows(); }
  std::size_t dim() const { return mean_.cols(); }
  // ρ μ₁ + τ μ₂, used for evaluation.
  const Matrix& mean() const { return mean_; }
  // ρ (μ₁ + √v₁ ε₁) + τ (μ₂ + √v₂ ε₂).
  Vector sample(std::size_t user, numerics::Rng& rng) const;

 private:
  GaussianPosterior first_;
  GaussianPosterior second_;
  double rho_;
  double tau_;
  Matrix mean_;
};

// One fused sample per user.
Matrix fuse_confounders(const GaussianPosterior& first, const GaussianPosterior& second, double rho, double tau,
                        numerics::Rng& rng);

// `<prefix>.bin` (flat float64 parameters) and `<prefix>.json` manifest.
void save_checkpoint(const IvaeModel& model, const std::filesystem::path& prefix,
                     const nlohmann::ordered_json& extra = {});
IvaeModel load_checkpoint(const std::filesystem::path& prefix);

}  // namespace ividr::ivae

#endif  // IVIDR_IVAE_IVAE_H_
