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

#include "ividr/numerics/linalg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ividr/common/error.h"

namespace ividr::numerics {
namespace {

constexpr int kMaxSweeps = 80;

// Jacobi on a tall (rows >= cols) matrix.
Svd svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  // Work column-major so column rotations touch contiguous memory.
  std::vector<Vector> u(n, Vector(m));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) u[j][i] = a(i, j);
  std::vector<Vector> v(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

  const double eps = std::numeric_limits<double>::epsilon();
  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u[p][i] * u[p][i];
          beta += u[q][i] * u[q][i];
          gamma += u[p][i] * u[q][i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u[p][i];
          const double uq = u[q][i];
          u[p][i] = c * up - s * uq;
          u[q][i] = s * up + c * uq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[p][i];
          const double vq = v[q][i];
          v[p][i] = c * vp - s * vq;
          v[q][i] = s * vp + c * vq;
        }
      }
    }
  }
  if (!converged) throw NumericError("svd: Jacobi sweeps did not converge");

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(u[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Matrix(m, n), Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.s[k] = sigma[j];
    for (std::size_t i = 0; i < m; ++i) out.u(i, k) = sigma[j] > 0.0 ? u[j][i] / sigma[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[j][i];
  }
  return out;
}

}  // namespace

Svd svd(const Matrix& a) {
  if (!a.all_finite()) throw NumericError("svd: non-finite input");
  if (a.rows() >= a.cols()) return svd_tall(a);
  Svd t = svd_tall(a.transpose());
  return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

Matrix pinv(const Matrix& a, double tol) {
  if (tol < 0.0) throw DomainError("pinv: negative tolerance");
  if (a.empty()) return Matrix(a.cols(), a.rows());
  const Svd d = svd(a);
  const double cutoff = d.s.empty() ? 0.0 : tol * d.s.front();
  Matrix out(a.cols(), a.rows());
  for (std::size_t k = 0; k < d.s.size(); ++k) {
    if (d.s[k] <= cutoff || d.s[k] == 0.0) continue;
    const double inv = 1.0 / d.s[k];
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double vik = d.v(i, k) * inv;
      if (vik == 0.0) continue;
      auto row = out.row(i);
      for (std::size_t j = 0; j < a.rows(); ++j) row[j] += vik * d.u(j, k);
    }
  }
  if (!out.all_finite()) throw NumericError("pinv: non-finite result");
  return out;
}

Vector least_squares(const Matrix& z, std::span<const double> t, double tol) {
  if (z.rows() != t.size()) {
    throw ShapeError("least_squares: design has " + std::to_string(z.rows()) +
                     " rows, target has " + std::to_string(t.size()));
  }
  return matvec(pinv(z, tol), t);
}

Matrix column_space_projector(const Matrix& z, double tol) {
  if (tol < 0.0) throw DomainError("column_space_projector: negative tolerance");
  Matrix p(z.rows(), z.rows());
  if (z.empty()) return p;
  // Σ u_k u_kᵀ over retained singular vectors; symmetric by construction.
  const Svd d = svd(z);
  const double cutoff = d.s.empty() ? 0.0 : tol * d.s.front();
  for (std::size_t k = 0; k < d.s.size(); ++k) {
    if (d.s[k] <= cutoff || d.s[k] == 0.0) continue;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      const double uik = d.u(i, k);
      if (uik == 0.0) continue;
      auto row = p.row(i);
      for (std::size_t j = 0; j < z.rows(); ++j) row[j] += uik * d.u(j, k);
    }
  }
  return p;
}

}  // namespace ividr::numerics
