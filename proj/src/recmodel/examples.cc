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

#include "ividr/recmodel/examples.h"

#include <algorithm>

#include "ividr/common/error.h"

namespace ividr::recmodel {

ExampleSampler::ExampleSampler(int n_users, int n_items, std::vector<datasets::Interaction> train, int negatives)
    : n_users_(n_users), n_items_(n_items), negatives_(negatives), train_(std::move(train)) {
  if (negatives < 0) throw ConfigError("negative sample count must be >= 0");
  items_by_user_.resize(static_cast<std::size_t>(n_users));
  for (const auto& t : train_) {
    if (t.rating != 0 && t.rating != 1) throw ValidationError("training triples must be binarized");
    if (t.user < 0 || t.user >= n_users || t.item < 0 || t.item >= n_items) {
      throw ValidationError("training triple id out of range");
    }
    items_by_user_[static_cast<std::size_t>(t.user)].push_back(t.item);
    positives_ += t.rating == 1;
  }
  for (auto& v : items_by_user_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

bool ExampleSampler::observed(int user, int item) const {
  const auto& v = items_by_user_[static_cast<std::size_t>(user)];
  return std::binary_search(v.begin(), v.end(), item);
}

std::vector<Example> ExampleSampler::epoch(numerics::Rng& rng) const {
  std::vector<Example> out;
  out.reserve(train_.size() + positives_ * static_cast<std::size_t>(negatives_));
  for (const auto& t : train_) {
    out.push_back({t.user, t.item, static_cast<double>(t.rating)});
    if (t.rating != 1) continue;
    const auto& seen = items_by_user_[static_cast<std::size_t>(t.user)];
    if (seen.size() >= static_cast<std::size_t>(n_items_)) continue;
    for (int k = 0; k < negatives_; ++k) {
      int item;
      do {
        item = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_items_)));
      } while (std::binary_search(seen.begin(), seen.end(), item));
      out.push_back({t.user, item, 0.0});
    }
  }
  rng.shuffle(out);
  return out;
}

std::vector<eval::UserItemLabel> to_labels(const std::vector<datasets::Interaction>& triples) {
  std::vector<eval::UserItemLabel> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    if (t.rating != 0 && t.rating != 1) throw ValidationError("ranking labels need binarized ratings");
    out.push_back({t.user, t.item, t.rating});
  }
  return out;
}

}  // namespace ividr::recmodel
