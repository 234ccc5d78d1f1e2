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

#ifndef IVIDR_NUMERICS_GRADCHECK_H_
#define IVIDR_NUMERICS_GRADCHECK_H_

#include <functional>
#include <span>

#include "ividr/numerics/parameter.h"

namespace ividr::numerics {

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor: the relative error of an entry is
  // |analytic − numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
};

// Compares the gradients already stored in `params[*].grad` with central
// differences of `loss` and returns the largest relative discrepancy.
// `loss` must evaluate the objective at the current parameter values
// without touching the stored gradients. Values are restored afterwards.
double finite_diff_check(const std::function<double()>& loss, std::span<Parameter* const> params,
                         const GradCheckOptions& options = {});

}  // namespace ividr::numerics

#endif  // IVIDR_NUMERICS_GRADCHECK_H_
