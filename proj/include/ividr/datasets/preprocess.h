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

#ifndef IVIDR_DATASETS_PREPROCESS_H_
#define IVIDR_DATASETS_PREPROCESS_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ividr/datasets/interaction_dataset.h"
#include "ividr/numerics/matrix.h"

namespace ividr::datasets {

inline constexpr int kDefaultPositiveThreshold = 4;

// feedback := 1 iff rating >= threshold. Throws ValidationError if the
// dataset is already binarized.
InteractionDataset binarize(const InteractionDataset& ds, int threshold = kDefaultPositiveThreshold);

// A_ui = 1 iff (u, i) is observed in the biased (training) data.
numerics::Matrix build_exposure(const InteractionDataset& ds);
numerics::Matrix build_exposure(int n_users, int n_items, const std::vector<Interaction>& observed);

struct ProxyRule {
  enum class Kind {
    // Keep the proxy the dataset already carries (synthetic W).
    kPassThrough,
    // Quartile of each user's mean biased rating; boundaries from biased data.
    kMeanRatingQuartile,
    // Distinct values of a user-feature column, in ascending order.
    kFeatureColumn,
  };
  Kind kind = Kind::kMeanRatingQuartile;
  int column = 0;
};

struct ProxyAssignment {
  std::vector<int> values;
  int categories = 0;
};

// Throws ConfigError when the rule cannot be applied (no proxy to pass
// through, missing feature column, binarized data for the rating rule).
ProxyAssignment build_proxy(const InteractionDataset& ds, const ProxyRule& rule);

// Linear-interpolated quantile of `values` (0 <= q <= 1); `values` non-empty.
double quantile(std::vector<double> values, double q);

struct SplitPolicy {
  enum class Kind {
    // Biased → train (+ validation carve), unbiased → test.
    kBiasedUnbiased,
    // All triples shuffled; test_fraction → test, then validation carve.
    kRandomHoldout,
  };
  Kind kind = Kind::kBiasedUnbiased;
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct DataSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
};

// Deterministic per seed. Throws ValidationError for an invalid policy or
// when train or test ends up empty.
DataSplit split(const InteractionDataset& ds, const SplitPolicy& policy);

// Zero-mean, unit-variance columns using statistics from `train_users` only.
// Constant columns are centred and left unscaled.
numerics::Matrix standardize_features(const numerics::Matrix& features,
                                      const std::vector<int>& train_users);

// Distinct users appearing in `triples`, ascending.
std::vector<int> users_in(const std::vector<Interaction>& triples);

// dataset.meta.json with counts for audit.
void write_dataset_meta(const InteractionDataset& ds, const std::filesystem::path& path);

}  // namespace ividr::datasets

#endif  // IVIDR_DATASETS_PREPROCESS_H_
