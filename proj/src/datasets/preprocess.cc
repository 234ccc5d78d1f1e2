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

#include "ividr/datasets/preprocess.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "ividr/common/error.h"
#include "ividr/numerics/rng.h"
#include "json.hpp"

namespace ividr::datasets {

using numerics::Matrix;

InteractionDataset binarize(const InteractionDataset& ds, int threshold) {
  if (ds.binarized) throw ValidationError("dataset is already binarized");
  InteractionDataset out = ds;
  for (auto& t : out.triples) t.rating = t.rating >= threshold ? 1 : 0;
  out.binarized = true;
  return out;
}

Matrix build_exposure(int n_users, int n_items, const std::vector<Interaction>& observed) {
  Matrix a(static_cast<std::size_t>(n_users), static_cast<std::size_t>(n_items));
  for (const auto& t : observed) {
    if (t.user < 0 || t.user >= n_users || t.item < 0 || t.item >= n_items) {
      throw ValidationError("interaction outside exposure matrix");
    }
    a(static_cast<std::size_t>(t.user), static_cast<std::size_t>(t.item)) = 1.0;
  }
  return a;
}

Matrix build_exposure(const InteractionDataset& ds) {
  return build_exposure(ds.n_users, ds.n_items, ds.select(SplitTag::kBiased));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ProxyAssignment build_proxy(const InteractionDataset& ds, const ProxyRule& rule) {
  ProxyAssignment out;
  switch (rule.kind) {
    case ProxyRule::Kind::kPassThrough: {
      if (ds.proxy.empty()) throw ConfigError("dataset carries no proxy to pass through");
      out.values = ds.proxy;
      out.categories = ds.n_proxy_categories;
      return out;
    }
    case ProxyRule::Kind::kMeanRatingQuartile: {
      if (ds.binarized) throw ConfigError("mean-rating proxy needs explicit ratings");
      std::vector<double> sum(static_cast<std::size_t>(ds.n_users), 0.0);
      std::vector<int> cnt(static_cast<std::size_t>(ds.n_users), 0);
      double global = 0.0;
      std::size_t n_global = 0;
      for (const auto& t : ds.triples) {
        if (t.split != SplitTag::kBiased) continue;
        sum[static_cast<std::size_t>(t.user)] += t.rating;
        ++cnt[static_cast<std::size_t>(t.user)];
        global += t.rating;
        ++n_global;
      }
      if (n_global == 0) throw ConfigError("mean-rating proxy needs biased (training) ratings");
      global /= static_cast<double>(n_global);
      std::vector<double> means(sum.size());
      std::vector<double> observed;
      for (std::size_t u = 0; u < sum.size(); ++u) {
        means[u] = cnt[u] > 0 ? sum[u] / cnt[u] : global;
        if (cnt[u] > 0) observed.push_back(means[u]);
      }
      const double b[3] = {quantile(observed, 0.25), quantile(observed, 0.5), quantile(observed, 0.75)};
      out.categories = 4;
      out.values.resize(means.size());
      for (std::size_t u = 0; u < means.size(); ++u) {
        out.values[u] = (means[u] > b[0]) + (means[u] > b[1]) + (means[u] > b[2]);
      }
      return out;
    }
    case ProxyRule::Kind::kFeatureColumn: {
      if (rule.column < 0 || static_cast<std::size_t>(rule.column) >= ds.user_features.cols()) {
        throw ConfigError("user feature column " + std::to_string(rule.column) + " not available");
      }
      const auto col = ds.user_features.col(static_cast<std::size_t>(rule.column));
      std::map<double, int> levels;
      for (double v : col) levels.emplace(v, 0);
      int next = 0;
      for (auto& [v, idx] : levels) idx = next++;
      out.categories = next;
      out.values.reserve(col.size());
      for (double v : col) out.values.push_back(levels.at(v));
      return out;
    }
  }
  throw ConfigError("unknown proxy rule");
}

namespace {

void carve_validation(std::vector<Interaction> pool, double fraction, numerics::Rng& rng, DataSplit& out) {
  const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size())));
  const auto picked = rng.sample_without_replacement(pool.size(), n_val);
  std::vector<bool> is_val(pool.size(), false);
  for (auto k : picked) is_val[k] = true;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    (is_val[k] ? out.validation : out.train).push_back(pool[k]);
  }
}

}  // namespace

DataSplit split(const InteractionDataset& ds, const SplitPolicy& policy) {
  if (!(policy.validation_fraction >= 0.0 && policy.validation_fraction < 1.0)) {
    throw ValidationError("validation fraction must lie in [0, 1)");
  }
  numerics::Rng rng = numerics::Rng::derive(policy.seed, 0x5b17);
  DataSplit out;
  if (policy.kind == SplitPolicy::Kind::kBiasedUnbiased) {
    carve_validation(ds.select(SplitTag::kBiased), policy.validation_fraction, rng, out);
    out.test = ds.select(SplitTag::kUnbiased);
  } else {
    if (!(policy.test_fraction > 0.0 && policy.test_fraction < 1.0)) {
      throw ValidationError("test fraction must lie in (0, 1)");
    }
    const auto n_test = static_cast<std::size_t>(
        std::floor(policy.test_fraction * static_cast<double>(ds.triples.size())));
    const auto picked = rng.sample_without_replacement(ds.triples.size(), n_test);
    std::vector<bool> is_test(ds.triples.size(), false);
    for (auto k : picked) is_test[k] = true;
    std::vector<Interaction> rest;
    for (std::size_t k = 0; k < ds.triples.size(); ++k) {
      (is_test[k] ? out.test : rest).push_back(ds.triples[k]);
    }
    carve_validation(std::move(rest), policy.validation_fraction, rng, out);
  }
  if (out.train.empty()) throw ValidationError("split produced an empty training set");
  if (out.test.empty()) throw ValidationError("split produced an empty test set");
  return out;
}

Matrix standardize_features(const Matrix& features, const std::vector<int>& train_users) {
  Matrix out = features;
  if (features.empty()) return out;
  if (train_users.empty()) throw ValidationError("feature standardization needs training users");
  const double n = static_cast<double>(train_users.size());
  for (std::size_t c = 0; c < features.cols(); ++c) {
    double mean = 0.0;
    for (int u : train_users) mean += features(static_cast<std::size_t>(u), c);
    mean /= n;
    double var = 0.0;
    for (int u : train_users) {
      const double d = features(static_cast<std::size_t>(u), c) - mean;
      var += d * d;
    }
    var /= n;
    const double scale = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t r = 0; r < features.rows(); ++r) out(r, c) = (features(r, c) - mean) * scale;
  }
  return out;
}

std::vector<int> users_in(const std::vector<Interaction>& triples) {
  std::set<int> s;
  for (const auto& t : triples) s.insert(t.user);
  return {s.begin(), s.end()};
}

void write_dataset_meta(const InteractionDataset& ds, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["n_users"] = ds.n_users;
  j["n_items"] = ds.n_items;
  j["n_biased"] = ds.count(SplitTag::kBiased);
  j["n_unbiased"] = ds.count(SplitTag::kUnbiased);
  j["binarized"] = ds.binarized;
  j["duplicates_dropped"] = ds.duplicates_dropped;
  j["feature_dim"] = ds.user_features.cols();
  j["proxy_categories"] = ds.n_proxy_categories;
  const double cells = static_cast<double>(ds.n_users) * static_cast<double>(ds.n_items);
  j["train_density"] = cells > 0 ? static_cast<double>(ds.count(SplitTag::kBiased)) / cells : 0.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ividr::datasets
