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

#ifndef IVIDR_DATASETS_INTERACTION_DATASET_H_
#define IVIDR_DATASETS_INTERACTION_DATASET_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ividr/numerics/matrix.h"

namespace ividr::datasets {

// Biased = collected under the production (MNAR) exposure policy and used for
// training; unbiased = uniformly exposed, used for testing.
enum class SplitTag { kBiased, kUnbiased };

std::string_view split_name(SplitTag tag);
// Parses "biased" / "unbiased"; nullopt otherwise.
std::optional<SplitTag> parse_split(std::string_view name);

struct Interaction {
  int user = 0;
  int item = 0;
  // 1..5 for explicit feedback, 0/1 once binarized.
  int rating = 0;
  SplitTag split = SplitTag::kBiased;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Bijection between original (string) ids and dense indices [0, n), in order
// of first appearance.
class IdMap {
 public:
  int intern(const std::string& original);
  std::optional<int> find(const std::string& original) const;
  const std::string& original(int index) const { return originals_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return originals_.size(); }
  // Identity map over [0, n).
  static IdMap dense(std::size_t n);

 private:
  std::vector<std::string> originals_;
  std::unordered_map<std::string, int> index_;
};

// Everything training code is allowed to see. Synthetic ground truth is kept
// in a separate structure and never stored here.
struct InteractionDataset {
  int n_users = 0;
  int n_items = 0;
  std::vector<Interaction> triples;
  bool binarized = false;

  // One categorical proxy per user (empty until assigned).
  std::vector<int> proxy;
  int n_proxy_categories = 0;

  // n_users × d_f; zero columns when the source has no user features.
  numerics::Matrix user_features;

  IdMap user_ids;
  IdMap item_ids;

  // Duplicate (user, item, split) lines dropped while loading (last wins).
  std::size_t duplicates_dropped = 0;

  std::size_t count(SplitTag tag) const;
  std::vector<Interaction> select(SplitTag tag) const;
  // Checks ids, rating ranges and per-user array sizes. Throws
  // ValidationError.
  void validate() const;
};

}  // namespace ividr::datasets

#endif  // IVIDR_DATASETS_INTERACTION_DATASET_H_
