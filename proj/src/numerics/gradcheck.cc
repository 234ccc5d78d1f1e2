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

#include "ividr/numerics/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace ividr::numerics {

double finite_diff_check(const std::function<double()>& loss, std::span<Parameter* const> params,
                         const GradCheckOptions& options) {
  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double plus = loss();
      p->value[i] = saved - options.step;
      const double minus = loss();
      p->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace ividr::numerics
