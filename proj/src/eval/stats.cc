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

#include "ividr/eval/stats.h"

#include <cmath>
#include <limits>
#include <algorithm>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ividr/common/error.h"

namespace ividr::eval {

// Accumulation is shifted by the first value, so constant samples give an
// exact mean and a zero spread.
double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v - x[0];
  return x[0] + s / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  double s = 0.0, ss = 0.0;
  for (double v : x) {
    const double d = v - x[0];
    s += d;
    ss += d * d;
  }
  return std::sqrt(std::max(0.0, (ss - s * s / n) / (n - 1.0)));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("paired_ttest: samples differ in length");
  if (a.size() < 2) throw DomainError("paired_ttest: need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double md = mean(d);
  const double sd = sample_std(d);
  TTestResult r;
  r.dof = static_cast<int>(d.size()) - 1;
  // Spread at rounding level counts as zero.
  const double scale = std::max(1.0, std::abs(md));
  if (sd <= 1e-14 * scale) {
    const bool zero_mean = std::abs(md) <= 1e-14 * scale;
    r.t = zero_mean ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), md);
    r.p_value = zero_mean ? 1.0 : 0.0;
    return r;
  }
  r.t = md / (sd / std::sqrt(static_cast<double>(d.size())));
  const boost::math::students_t_distribution<double> dist(r.dof);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace ividr::eval
