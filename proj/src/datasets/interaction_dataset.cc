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

#include "ividr/datasets/interaction_dataset.h"

#include <string>

#include "ividr/common/error.h"

namespace ividr::datasets {

std::string_view split_name(SplitTag tag) {
  return tag == SplitTag::kBiased ? "biased" : "unbiased";
}

std::optional<SplitTag> parse_split(std::string_view name) {
  if (name == "biased") return SplitTag::kBiased;
  if (name == "unbiased") return SplitTag::kUnbiased;
  return std::nullopt;
}

int IdMap::intern(const std::string& original) {
  auto [it, inserted] = index_.try_emplace(original, static_cast<int>(originals_.size()));
  if (inserted) originals_.push_back(original);
  return it->second;
}

std::optional<int> IdMap::find(const std::string& original) const {
  auto it = index_.find(original);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

IdMap IdMap::dense(std::size_t n) {
  IdMap m;
  for (std::size_t i = 0; i < n; ++i) m.intern(std::to_string(i));
  return m;
}

std::size_t InteractionDataset::count(SplitTag tag) const {
  std::size_t n = 0;
  for (const auto& t : triples) n += t.split == tag;
  return n;
}

std::vector<Interaction> InteractionDataset::select(SplitTag tag) const {
  std::vector<Interaction> out;
  for (const auto& t : triples) {
    if (t.split == tag) out.push_back(t);
  }
  return out;
}

void InteractionDataset::validate() const {
  if (n_users < 0 || n_items < 0) throw ValidationError("negative dataset dimensions");
  const int lo = binarized ? 0 : 1;
  const int hi = binarized ? 1 : 5;
  for (const auto& t : triples) {
    if (t.user < 0 || t.user >= n_users || t.item < 0 || t.item >= n_items) {
      throw ValidationError("triple id out of range: (" + std::to_string(t.user) + ", " +
                            std::to_string(t.item) + ")");
    }
    if (t.rating < lo || t.rating > hi) {
      throw ValidationError("rating " + std::to_string(t.rating) + " outside [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + "]");
    }
  }
  if (!proxy.empty()) {
    if (proxy.size() != static_cast<std::size_t>(n_users)) {
      throw ValidationError("proxy vector length differs from n_users");
    }
    for (int w : proxy) {
      if (w < 0 || w >= n_proxy_categories) throw ValidationError("proxy category out of range");
    }
  }
  if (!user_features.empty() && user_features.rows() != static_cast<std::size_t>(n_users)) {
    throw ValidationError("user feature rows differ from n_users");
  }
  if (!user_features.all_finite()) throw ValidationError("non-finite user feature");
}

}  // namespace ividr::datasets
