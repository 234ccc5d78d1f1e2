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

#ifndef IVIDR_EVAL_RANKING_H_
#define IVIDR_EVAL_RANKING_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace ividr::eval {

// One user's candidate items sorted by descending score, ties broken by
// ascending item id; `labels[r]` is the binary relevance of `items[r]`.
struct RankedList {
  std::vector<int> items;
  std::vector<int> labels;
};

// Builds a RankedList. Throws ValidationError on duplicate items or a
// labels/scores length mismatch.
RankedList rank_items(std::span<const int> items, std::span<const double> scores,
                      std::span<const int> labels);

// NDCG@k with gain = label and discount 1/log2(rank + 1). Returns nullopt
// ("skip") for an empty list or a list without positives. k must be >= 1.
std::optional<double> ndcg_at_k(const RankedList& ranked, std::size_t k);

// Hits in the top k divided by min(k, #positives). Same skip rules.
std::optional<double> recall_at_k(const RankedList& ranked, std::size_t k);

struct UserItemLabel {
  int user;
  int item;
  int label;
};

struct RankingSummary {
  double ndcg = 0.0;
  double recall = 0.0;
  // Users that contributed (had at least one positive).
  std::size_t users = 0;
};

using ScoreFn = std::function<double(int user, int item)>;

// Per-user metrics over each user's candidate set, averaged over users.
// Throws ValidationError when `test` is empty or no user has a positive.
RankingSummary evaluate_rankings(std::span<const UserItemLabel> test, const ScoreFn& score,
                                 std::size_t k);

}  // namespace ividr::eval

#endif  // IVIDR_EVAL_RANKING_H_
