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

#include "ividr/numerics/gaussian.h"

#include <cmath>
#include <numbers>

#include "ividr/common/error.h"

namespace ividr::numerics {
namespace {

void check_lengths(std::size_t n, std::initializer_list<std::size_t> others, const char* op) {
  for (std::size_t m : others)
    if (m != n) throw ShapeError(std::string(op) + ": length mismatch");
}

void check_positive(std::span<const double> var, const char* op) {
  for (double v : var)
    if (!(v > 0.0)) throw DomainError(std::string(op) + ": variance must be positive");
}

}  // namespace

GaussianDraw gaussian_sample(std::span<const double> mu, std::span<const double> var, Rng& rng) {
  check_lengths(mu.size(), {var.size()}, "gaussian_sample");
  for (double v : var)
    if (!(v >= 0.0)) throw DomainError("gaussian_sample: negative variance");
  GaussianDraw d{Vector(mu.size()), Vector(mu.size())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    d.eps[i] = rng.normal();
    d.sample[i] = mu[i] + std::sqrt(var[i]) * d.eps[i];
  }
  return d;
}

double kl_gaussian_diag(std::span<const double> mu_q, std::span<const double> var_q,
                        std::span<const double> mu_p, std::span<const double> var_p) {
  check_lengths(mu_q.size(), {var_q.size(), mu_p.size(), var_p.size()}, "kl_gaussian_diag");
  check_positive(var_q, "kl_gaussian_diag");
  check_positive(var_p, "kl_gaussian_diag");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu_q.size(); ++i) {
    const double diff = mu_q[i] - mu_p[i];
    kl += std::log(var_p[i] / var_q[i]) + (var_q[i] + diff * diff) / var_p[i] - 1.0;
  }
  return 0.5 * kl;
}

KlGradient kl_gaussian_diag_gradient(std::span<const double> mu_q, std::span<const double> var_q,
                                     std::span<const double> mu_p, std::span<const double> var_p) {
  check_lengths(mu_q.size(), {var_q.size(), mu_p.size(), var_p.size()},
                "kl_gaussian_diag_gradient");
  check_positive(var_q, "kl_gaussian_diag_gradient");
  check_positive(var_p, "kl_gaussian_diag_gradient");
  const std::size_t n = mu_q.size();
  KlGradient g{Vector(n), Vector(n), Vector(n), Vector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = mu_q[i] - mu_p[i];
    g.mu_q[i] = diff / var_p[i];
    g.mu_p[i] = -diff / var_p[i];
    g.var_q[i] = 0.5 * (1.0 / var_p[i] - 1.0 / var_q[i]);
    g.var_p[i] = 0.5 * (1.0 / var_p[i] - (var_q[i] + diff * diff) / (var_p[i] * var_p[i]));
  }
  return g;
}

double gaussian_log_pdf(std::span<const double> x, std::span<const double> mu,
                        std::span<const double> var) {
  check_lengths(x.size(), {mu.size(), var.size()}, "gaussian_log_pdf");
  check_positive(var, "gaussian_log_pdf");
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mu[i];
    lp += -0.5 * (std::log(2.0 * std::numbers::pi * var[i]) + d * d / var[i]);
  }
  return lp;
}

}  // namespace ividr::numerics
