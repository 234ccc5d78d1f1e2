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

#ifndef IVIDR_EVAL_REPORT_H_
#define IVIDR_EVAL_REPORT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ividr::eval {

struct SeedValue {
  std::uint64_t seed;
  double value;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  // Paired t-test against the report's baseline variant on shared seeds.
  std::optional<double> p_value;
};

// Per-seed metric values for several variants plus aggregate statistics.
// Variants and metrics keep insertion order.
class MetricsReport {
 public:
  void set_baseline(std::string variant) { baseline_ = std::move(variant); }
  const std::string& baseline() const { return baseline_; }

  // Adds or replaces the value of (variant, metric, seed).
  void add(const std::string& variant, const std::string& metric, std::uint64_t seed,
           double value);

  std::vector<std::string> variants() const;
  std::vector<std::string> metrics() const;
  // Values sorted by seed; empty when absent.
  std::vector<SeedValue> values(const std::string& variant, const std::string& metric) const;
  MetricSummary summary(const std::string& variant, const std::string& metric) const;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  // One row per seed × variant × metric: `seed,variant,metric,value`.
  std::string to_csv() const;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;

 private:
  struct Series {
    std::string variant;
    std::string metric;
    std::vector<SeedValue> values;
    friend bool operator==(const Series& a, const Series& b) {
      if (a.variant != b.variant || a.metric != b.metric || a.values.size() != b.values.size())
        return false;
      for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.values[i].seed != b.values[i].seed || a.values[i].value != b.values[i].value)
          return false;
      return true;
    }
  };
  const Series* find(const std::string& variant, const std::string& metric) const;

  std::string baseline_;
  std::vector<Series> series_;
};

}  // namespace ividr::eval

#endif  // IVIDR_EVAL_REPORT_H_
