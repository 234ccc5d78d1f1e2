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

#ifndef IVIDR_RECMODEL_MF_H_
#define IVIDR_RECMODEL_MF_H_

#include <cstddef>
#include <span>

#include "ividr/numerics/adam.h"
#include "ividr/numerics/parameter.h"
#include "ividr/numerics/rng.h"

namespace ividr::recmodel {

using numerics::Parameter;

// p_uᵀ q_i + k_u + k_i + g.
class MfModel {
 public:
  MfModel() = default;
  // Factors ~ N(0, init_sd²), biases zero.
  MfModel(int n_users, int n_items, int dim, double init_sd, numerics::Rng& rng);
  static MfModel zeros(int n_users, int n_items, int dim);

  int n_users() const { return n_users_; }
  int n_items() const { return n_items_; }
  int dim() const { return dim_; }

  double score(int u, int i) const;
  // Adds `g · ∂score/∂θ` to the parameter gradients.
  void accumulate_grad(int u, int i, double g);

  std::span<const double> user_factor(int u) const;
  std::span<const double> item_factor(int i) const;
  std::span<double> user_factor(int u);
  std::span<double> item_factor(int i);

  numerics::ParameterList parameters();

  Parameter user_factors;
  Parameter item_factors;
  Parameter user_bias;
  Parameter item_bias;
  Parameter global_bias;

 private:
  void allocate(int n_users, int n_items, int dim);

  int n_users_ = 0;
  int n_items_ = 0;
  int dim_ = 0;
};

class ExampleSampler;

// Plain BCE matrix factorization for `epochs` passes over sampled examples,
// used to warm-start item embeddings.
MfModel fit_mf(const ExampleSampler& sampler, int n_users, int n_items, int dim, int epochs,
               const numerics::AdamConfig& adam, std::size_t batch_size, numerics::Rng& rng);

}  // namespace ividr::recmodel

#endif  // IVIDR_RECMODEL_MF_H_
