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

#include "ividr/numerics/parameter.h"

#include "ividr/common/error.h"

namespace ividr::numerics {

std::vector<double> flatten_values(std::span<Parameter* const> params) {
  std::vector<double> flat;
  flat.reserve(total_size(params));
  for (const Parameter* p : params) flat.insert(flat.end(), p->value.begin(), p->value.end());
  return flat;
}

void load_values(std::span<Parameter* const> params, std::span<const double> flat) {
  if (flat.size() != total_size(params)) {
    throw ShapeError("load_values: blob has " + std::to_string(flat.size()) +
                     " values, parameters need " + std::to_string(total_size(params)));
  }
  std::size_t offset = 0;
  for (Parameter* p : params) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), p->size(), p->value.begin());
    offset += p->size();
  }
}

}  // namespace ividr::numerics
