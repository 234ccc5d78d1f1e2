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

#ifndef IVIDR_NUMERICS_LINALG_H_
#define IVIDR_NUMERICS_LINALG_H_

#include <span>

#include "ividr/numerics/matrix.h"

namespace ividr::numerics {

// Thin singular value decomposition a = u · diag(s) · vᵀ with
// k = min(rows, cols) singular values sorted in decreasing order.
// u is rows × k, v is cols × k.
struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

// One-sided (Hestenes) Jacobi SVD. Throws NumericError if the sweeps fail
// to converge or the input holds non-finite values.
Svd svd(const Matrix& a);

// Relative cutoff used when the caller does not pick one: singular values
// below this times the largest one are treated as zero.
inline constexpr double kDefaultPinvTolerance = 1e-12;

// Moore–Penrose pseudoinverse via SVD. Singular values below
// `tol` × σ_max are dropped.
Matrix pinv(const Matrix& a, double tol = kDefaultPinvTolerance);

// Minimum-norm least-squares solution of z τ ≈ t, i.e. τ = z⁺ t.
Vector least_squares(const Matrix& z, std::span<const double> t,
                     double tol = kDefaultPinvTolerance);

// Orthogonal projector z z⁺ onto the column space of z.
Matrix column_space_projector(const Matrix& z, double tol = kDefaultPinvTolerance);

}  // namespace ividr::numerics

#endif  // IVIDR_NUMERICS_LINALG_H_
