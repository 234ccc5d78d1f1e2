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

#ifndef IVIDR_NUMERICS_ADAM_H_
#define IVIDR_NUMERICS_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ividr/numerics/parameter.h"

namespace ividr::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style) decay, applied as θ ← θ − lr · wd · θ.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(std::span<Parameter* const> params, const AdamConfig& config);

// One bias-corrected Adam update using each parameter's accumulated grad,
// then zeroes the grads. Throws ShapeError if `params` does not match the
// layout the state was created with.
void adam_step(AdamState& state, std::span<Parameter* const> params);

// Convenience owner of a parameter list and its optimizer state.
class Adam {
 public:
  Adam(ParameterList params, const AdamConfig& config)
      : params_(std::move(params)), state_(make_adam_state(params_, config)) {}

  void step() { adam_step(state_, params_); }
  void zero_grad() { zero_grads(params_); }
  const AdamState& state() const { return state_; }
  const ParameterList& parameters() const { return params_; }

 private:
  ParameterList params_;
  AdamState state_;
};

}  // namespace ividr::numerics

#endif  // IVIDR_NUMERICS_ADAM_H_
