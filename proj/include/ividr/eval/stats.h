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

#ifndef IVIDR_EVAL_STATS_H_
#define IVIDR_EVAL_STATS_H_

#include <span>

namespace ividr::eval {

double mean(std::span<const double> x);
// Sample standard deviation (n − 1 denominator); 0 for fewer than 2 values.
double sample_std(std::span<const double> x);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

// Two-sided paired t-test on a − b. Degenerate cases: zero spread of the
// differences gives p = 0 for a non-zero mean difference and p = 1 otherwise.
// Requires equal lengths >= 2.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

}  // namespace ividr::eval

#endif  // IVIDR_EVAL_STATS_H_
