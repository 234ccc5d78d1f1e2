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

#ifndef IVIDR_NUMERICS_PARAMETER_H_
#define IVIDR_NUMERICS_PARAMETER_H_

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace ividr::numerics {

// A trainable tensor: values plus an accumulated gradient of equal length.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, std::size_t n, double fill = 0.0)
      : name(std::move(name)), value(n, fill), grad(n, 0.0) {}

  std::string name;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using ParameterList = std::vector<Parameter*>;

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

inline std::size_t total_size(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->size();
  return n;
}

// Concatenated parameter values, in list order.
std::vector<double> flatten_values(std::span<Parameter* const> params);
// Inverse of flatten_values. Throws ShapeError on length mismatch.
void load_values(std::span<Parameter* const> params, std::span<const double> flat);

}  // namespace ividr::numerics

#endif  // IVIDR_NUMERICS_PARAMETER_H_
