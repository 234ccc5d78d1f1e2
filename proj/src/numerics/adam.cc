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

#include "ividr/numerics/adam.h"

#include <cmath>

#include "ividr/common/error.h"

namespace ividr::numerics {

AdamState make_adam_state(std::span<Parameter* const> params, const AdamConfig& config) {
  if (!(config.learning_rate > 0.0) || config.weight_decay < 0.0 || config.beta1 < 0.0 ||
      config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw ConfigError("Adam: invalid hyper-parameters");
  }
  AdamState state;
  state.config = config;
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->size(), 0.0);
    state.second_moment.emplace_back(p->size(), 0.0);
  }
  return state;
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: parameter list does not match optimizer state");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  const double step_size = c.learning_rate / bias1;
  const double decay = c.learning_rate * c.weight_decay;

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != p.size() || p.grad.size() != p.size()) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + p.name + "'");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      if (decay != 0.0) p.value[i] -= decay * p.value[i];
      p.value[i] -= step_size * m[i] / (std::sqrt(v[i] / bias2) + c.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace ividr::numerics
