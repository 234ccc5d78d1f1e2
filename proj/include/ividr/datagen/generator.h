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

#ifndef IVIDR_DATAGEN_GENERATOR_H_
#define IVIDR_DATAGEN_GENERATOR_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ividr/datasets/interaction_dataset.h"
#include "ividr/numerics/matrix.h"
#include "ividr/numerics/rng.h"
#include "json.hpp"

namespace ividr::datagen {

using numerics::Matrix;

struct GenConfig {
  int n_users = 10000;
  int n_items = 1000;
  int confounder_dim = 2;
  int n_mixture_components = 5;
  // Exposure density weight, in (0, 1].
  double alpha = 0.1;
  // Weight of the confounder term in the preference score.
  double beta = 2.0;
  // Weight of the i.i.d. exposure noise.
  double gamma = 0.0;
  int rating_levels = 5;
  // Per-component standard deviation of C | W and V | M.
  double component_sd = 0.3;
  // Spread of the discretized normal over proxy categories.
  double proxy_sd = 1.2;
  int preference_dim = 4;
  double rating_noise_sd = 0.1;
  int feature_dim = 8;
  // Uniformly exposed test items per user.
  int unbiased_per_user = 50;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Named presets: "paper" (10000 × 1000), "desk" (2000 × 300) and "coat"
// (290 × 300, about 24 biased and 16 unbiased ratings per user).
GenConfig preset(const std::string& name);

// Component centres: coordinate d of category w sits at
// grid[(w * (d + 1)) mod K] with grid = {k - (K - 1) / 2}. For K = 5, d = 2
// this gives five non-collinear points on {-2..2}².
Matrix component_means(int n_components, int dim);

// Discretized N(centre, sd²) over {0..K-1}, centre = (K - 1) / 2.
std::vector<double> proxy_probabilities(int n_components, double sd);

struct MixtureDraw {
  Matrix values;  // n × confounder_dim
  std::vector<int> labels;
};

// C | W per user. Each user draws from Rng::derive(base, u) where base is
// taken from `rng`, so the result does not depend on evaluation order.
MixtureDraw sample_user_confounders(const GenConfig& cfg, numerics::Rng& rng);
// V | M per item, same law.
MixtureDraw sample_item_factors(const GenConfig& cfg, numerics::Rng& rng);

// α · sigmoid(LeakyReLU(h · mix · e_h) + γ ε).
double exposure_probability(std::span<const double> h, const Matrix& mix, std::span<const double> e_h,
                            double alpha, double gamma, double eps);

// A_ui ~ Bernoulli(exposure_probability(...)), ε i.i.d. per pair.
Matrix gen_exposure(const Matrix& h, const Matrix& e_h, const Matrix& mix, double alpha, double gamma,
                    numerics::Rng& rng);

struct RatingTable {
  // s_ui = e_uᵀ e_i + β h_uᵀ e_h,i + ε_ui for every pair.
  Matrix raw;
  // Ascending cut points between the levels (levels - 1 of them).
  std::vector<double> thresholds;
  int level(std::size_t u, std::size_t i) const;
};

// Quantile binning of every raw score into `levels` equal-mass ratings.
RatingTable gen_ratings(const Matrix& e_u, const Matrix& e_i, const Matrix& h, const Matrix& e_h, double beta,
                        double noise_sd, int levels, numerics::Rng& rng);

struct GroundTruth {
  Matrix c;
  Matrix v;
  std::vector<int> item_proxy;
  Matrix user_embedding;
  Matrix item_embedding;
  Matrix mix;
};

struct SyntheticDataset {
  // What training code may see: triples, W, Z.
  datasets::InteractionDataset data;
  Matrix exposure;
  GroundTruth truth;
};

SyntheticDataset generate(const GenConfig& cfg);

// Writes the bundle directory; `extra` is merged into meta.json.
void write_synthetic_bundle(const std::filesystem::path& dir, const SyntheticDataset& ds, const GenConfig& cfg,
                            const nlohmann::ordered_json& extra = {});

}  // namespace ividr::datagen

#endif  // IVIDR_DATAGEN_GENERATOR_H_
