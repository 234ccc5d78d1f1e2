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

#ifndef IVIDR_EVAL_MCC_H_
#define IVIDR_EVAL_MCC_H_

#include <span>

#include "ividr/numerics/matrix.h"

namespace ividr::eval {

// Pearson correlation; 0 when either argument has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Mean correlation coefficient between estimated and true latent
// coordinates: the mean absolute Pearson correlation under the best
// one-to-one matching of true coordinates to estimated ones (brute force).
// c_est may carry more coordinates than c_true; surplus ones stay unmatched.
// Requires equal row counts, n >= 3 and at most 8 estimated coordinates.
double mcc(const numerics::Matrix& c_est, const numerics::Matrix& c_true);

// Least-squares fit target ≈ source·A + b; returns the pooled R² over all
// target columns (1 − SSE / total sum of squares about column means).
double affine_alignment_r2(const numerics::Matrix& source, const numerics::Matrix& target);

}  // namespace ividr::eval

#endif  // IVIDR_EVAL_MCC_H_
