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

#include "ividr/recmodel/mf.h"

#include <algorithm>

#include "ividr/common/error.h"
#include "ividr/recmodel/examples.h"
#include "ividr/recmodel/loss.h"
#include "ividr/numerics/matrix.h"

namespace ividr::recmodel {

void MfModel::allocate(int n_users, int n_items, int dim) {
  if (n_users < 0 || n_items < 0 || dim < 1) throw ConfigError("invalid MF dimensions");
  n_users_ = n_users;
  n_items_ = n_items;
  dim_ = dim;
  const auto d = static_cast<std::size_t>(dim);
  user_factors = Parameter("mf.user_factors", static_cast<std::size_t>(n_users) * d);
  item_factors = Parameter("mf.item_factors", static_cast<std::size_t>(n_items) * d);
  user_bias = Parameter("mf.user_bias", static_cast<std::size_t>(n_users));
  item_bias = Parameter("mf.item_bias", static_cast<std::size_t>(n_items));
  global_bias = Parameter("mf.global_bias", 1);
}

MfModel::MfModel(int n_users, int n_items, int dim, double init_sd, numerics::Rng& rng) {
  allocate(n_users, n_items, dim);
  for (double& v : user_factors.value) v = init_sd * rng.normal();
  for (double& v : item_factors.value) v = init_sd * rng.normal();
}

MfModel MfModel::zeros(int n_users, int n_items, int dim) {
  MfModel m;
  m.allocate(n_users, n_items, dim);
  return m;
}

std::span<const double> MfModel::user_factor(int u) const {
  return {user_factors.value.data() + static_cast<std::size_t>(u) * dim_, static_cast<std::size_t>(dim_)};
}
std::span<const double> MfModel::item_factor(int i) const {
  return {item_factors.value.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}
std::span<double> MfModel::user_factor(int u) {
  return {user_factors.value.data() + static_cast<std::size_t>(u) * dim_, static_cast<std::size_t>(dim_)};
}
std::span<double> MfModel::item_factor(int i) {
  return {item_factors.value.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}

double MfModel::score(int u, int i) const {
  return numerics::dot(user_factor(u), item_factor(i)) + user_bias.value[static_cast<std::size_t>(u)] +
         item_bias.value[static_cast<std::size_t>(i)] + global_bias.value[0];
}

void MfModel::accumulate_grad(int u, int i, double g) {
  const auto d = static_cast<std::size_t>(dim_);
  double* gp = user_factors.grad.data() + static_cast<std::size_t>(u) * d;
  double* gq = item_factors.grad.data() + static_cast<std::size_t>(i) * d;
  const auto p = user_factor(u);
  const auto q = item_factor(i);
  for (std::size_t k = 0; k < d; ++k) {
    gp[k] += g * q[k];
    gq[k] += g * p[k];
  }
  user_bias.grad[static_cast<std::size_t>(u)] += g;
  item_bias.grad[static_cast<std::size_t>(i)] += g;
  global_bias.grad[0] += g;
}

numerics::ParameterList MfModel::parameters() {
  return {&user_factors, &item_factors, &user_bias, &item_bias, &global_bias};
}

MfModel fit_mf(const ExampleSampler& sampler, int n_users, int n_items, int dim, int epochs,
               const numerics::AdamConfig& adam, std::size_t batch_size, numerics::Rng& rng) {
  MfModel m(n_users, n_items, dim, 0.1, rng);
  numerics::Adam opt(m.parameters(), adam);
  for (int e = 0; e < epochs; ++e) {
    const auto examples = sampler.epoch(rng);
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
      const std::size_t end = std::min(examples.size(), start + batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = examples[k];
        m.accumulate_grad(ex.user, ex.item, scale * bce_with_logit_grad(m.score(ex.user, ex.item), ex.label));
      }
      opt.step();
    }
  }
  return m;
}

}  // namespace ividr::recmodel
