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

#include "ividr/eval/mcc.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ividr/common/error.h"
#include "ividr/numerics/linalg.h"

namespace ividr::eval {

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  if (a.empty()) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double mcc(const numerics::Matrix& c_est, const numerics::Matrix& c_true) {
  if (c_est.rows() != c_true.rows()) throw ShapeError("mcc: row counts differ");
  if (c_est.rows() < 3) throw DomainError("mcc: need at least 3 rows");
  const std::size_t d_true = c_true.cols();
  const std::size_t d_est = c_est.cols();
  if (d_true == 0 || d_est < d_true) throw ShapeError("mcc: estimate has too few coordinates");
  if (d_est > 8) throw ShapeError("mcc: brute-force matching supports at most 8 coordinates");

  std::vector<std::vector<double>> corr(d_true, std::vector<double>(d_est));
  for (std::size_t t = 0; t < d_true; ++t) {
    const numerics::Vector truth = c_true.col(t);
    for (std::size_t e = 0; e < d_est; ++e) corr[t][e] = std::abs(pearson(c_est.col(e), truth));
  }

  std::vector<std::size_t> perm(d_est);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t t = 0; t < d_true; ++t) s += corr[t][perm[t]];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(d_true);
}

double affine_alignment_r2(const numerics::Matrix& source, const numerics::Matrix& target) {
  if (source.rows() != target.rows()) throw ShapeError("affine_alignment_r2: row counts differ");
  const std::size_t n = source.rows();
  if (n <= source.cols() + 1) throw DomainError("affine_alignment_r2: too few rows for the fit");
  numerics::Matrix design(n, source.cols() + 1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < source.cols(); ++c) design(r, c) = source(r, c);
    design(r, source.cols()) = 1.0;
  }
  double sse = 0.0, sst = 0.0;
  for (std::size_t t = 0; t < target.cols(); ++t) {
    const numerics::Vector y = target.col(t);
    const numerics::Vector coef = numerics::least_squares(design, y);
    const numerics::Vector fit = numerics::matvec(design, coef);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      sse += (y[r] - fit[r]) * (y[r] - fit[r]);
      sst += (y[r] - mean) * (y[r] - mean);
    }
  }
  if (sst <= 0.0) throw DomainError("affine_alignment_r2: target has no variance");
  return 1.0 - sse / sst;
}

}  // namespace ividr::eval
