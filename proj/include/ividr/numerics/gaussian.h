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

#ifndef IVIDR_NUMERICS_GAUSSIAN_H_
#define IVIDR_NUMERICS_GAUSSIAN_H_

#include <span>

#include "ividr/numerics/matrix.h"
#include "ividr/numerics/rng.h"

namespace ividr::numerics {

// Reparameterized draw mu + sqrt(var) ⊙ eps. `eps` is kept so the caller can
// push gradients back to mu (identity) and var (eps / (2 sqrt(var))).
struct GaussianDraw {
  Vector sample;
  Vector eps;
};

GaussianDraw gaussian_sample(std::span<const double> mu, std::span<const double> var, Rng& rng);

// KL(N(mu_q, diag var_q) || N(mu_p, diag var_p)) summed over dimensions.
double kl_gaussian_diag(std::span<const double> mu_q, std::span<const double> var_q,
                        std::span<const double> mu_p, std::span<const double> var_p);

struct KlGradient {
  Vector mu_q;
  Vector var_q;
  Vector mu_p;
  Vector var_p;
};

KlGradient kl_gaussian_diag_gradient(std::span<const double> mu_q, std::span<const double> var_q,
                                     std::span<const double> mu_p, std::span<const double> var_p);

// Log density of N(mu, diag var) at x.
double gaussian_log_pdf(std::span<const double> x, std::span<const double> mu,
                        std::span<const double> var);

}  // namespace ividr::numerics

#endif  // IVIDR_NUMERICS_GAUSSIAN_H_
