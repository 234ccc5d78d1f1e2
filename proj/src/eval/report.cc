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

#include "ividr/eval/report.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ividr/common/error.h"
#include "ividr/eval/stats.h"

namespace ividr::eval {
namespace {

std::string format_double(double v) {
  // 17 significant digits round-trip any double exactly.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void MetricsReport::add(const std::string& variant, const std::string& metric,
                        std::uint64_t seed, double value) {
  auto it = std::find_if(series_.begin(), series_.end(), [&](const Series& s) {
    return s.variant == variant && s.metric == metric;
  });
  if (it == series_.end()) {
    series_.push_back({variant, metric, {}});
    it = std::prev(series_.end());
  }
  auto v = std::find_if(it->values.begin(), it->values.end(),
                        [&](const SeedValue& sv) { return sv.seed == seed; });
  if (v != it->values.end()) {
    v->value = value;
  } else {
    it->values.push_back({seed, value});
    std::sort(it->values.begin(), it->values.end(),
              [](const SeedValue& a, const SeedValue& b) { return a.seed < b.seed; });
  }
}

std::vector<std::string> MetricsReport::variants() const {
  std::vector<std::string> out;
  for (const Series& s : series_)
    if (std::find(out.begin(), out.end(), s.variant) == out.end()) out.push_back(s.variant);
  return out;
}

std::vector<std::string> MetricsReport::metrics() const {
  std::vector<std::string> out;
  for (const Series& s : series_)
    if (std::find(out.begin(), out.end(), s.metric) == out.end()) out.push_back(s.metric);
  return out;
}

const MetricsReport::Series* MetricsReport::find(const std::string& variant,
                                                 const std::string& metric) const {
  for (const Series& s : series_)
    if (s.variant == variant && s.metric == metric) return &s;
  return nullptr;
}

std::vector<SeedValue> MetricsReport::values(const std::string& variant,
                                             const std::string& metric) const {
  const Series* s = find(variant, metric);
  return s ? s->values : std::vector<SeedValue>{};
}

MetricSummary MetricsReport::summary(const std::string& variant,
                                     const std::string& metric) const {
  MetricSummary out;
  const Series* s = find(variant, metric);
  if (!s) return out;
  std::vector<double> v;
  for (const SeedValue& sv : s->values) v.push_back(sv.value);
  out.mean = mean(v);
  out.std = sample_std(v);
  out.n = v.size();
  if (!baseline_.empty() && variant != baseline_) {
    const Series* b = find(baseline_, metric);
    if (b) {
      std::vector<double> x, y;
      for (const SeedValue& sv : s->values) {
        auto it = std::find_if(b->values.begin(), b->values.end(),
                               [&](const SeedValue& o) { return o.seed == sv.seed; });
        if (it == b->values.end()) continue;
        x.push_back(sv.value);
        y.push_back(it->value);
      }
      if (x.size() >= 2) out.p_value = paired_ttest(x, y).p_value;
    }
  }
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["baseline"] = baseline_;
  j["series"] = nlohmann::json::array();
  for (const Series& s : series_) {
    nlohmann::json values = nlohmann::json::array();
    for (const SeedValue& sv : s.values) values.push_back({{"seed", sv.seed}, {"value", sv.value}});
    j["series"].push_back({{"variant", s.variant}, {"metric", s.metric}, {"values", values}});
  }
  nlohmann::json summary = nlohmann::json::object();
  for (const std::string& v : variants()) {
    for (const std::string& m : metrics()) {
      if (!find(v, m)) continue;
      const MetricSummary ms = this->summary(v, m);
      nlohmann::json e = {{"mean", ms.mean}, {"std", ms.std}, {"n", ms.n}};
      e["p_value"] = ms.p_value ? nlohmann::json(*ms.p_value) : nlohmann::json(nullptr);
      summary[v][m] = e;
    }
  }
  j["summary"] = summary;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.baseline_ = j.at("baseline").get<std::string>();
    for (const auto& s : j.at("series")) {
      for (const auto& v : s.at("values")) {
        r.add(s.at("variant").get<std::string>(), s.at("metric").get<std::string>(),
              v.at("seed").get<std::uint64_t>(), v.at("value").get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("MetricsReport::from_json: ") + e.what());
  }
  return r;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "seed,variant,metric,value\n";
  for (const Series& s : series_)
    for (const SeedValue& sv : s.values)
      out << sv.seed << ',' << s.variant << ',' << s.metric << ',' << format_double(sv.value)
          << '\n';
  return out.str();
}

}  // namespace ividr::eval
