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

#include "ividr/eval/ranking.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "ividr/common/error.h"

namespace ividr::eval {
namespace {

void check_k(std::size_t k) {
  if (k < 1) throw DomainError("ranking metric: k must be >= 1");
}

std::size_t count_positives(const RankedList& ranked) {
  return static_cast<std::size_t>(
      std::count_if(ranked.labels.begin(), ranked.labels.end(), [](int l) { return l > 0; }));
}

}  // namespace

RankedList rank_items(std::span<const int> items, std::span<const double> scores,
                      std::span<const int> labels) {
  if (items.size() != scores.size() || items.size() != labels.size()) {
    throw ValidationError("rank_items: items, scores and labels differ in length");
  }
  std::unordered_set<int> seen;
  for (int it : items)
    if (!seen.insert(it).second) throw ValidationError("rank_items: duplicate item id");

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });
  RankedList out;
  out.items.reserve(items.size());
  out.labels.reserve(items.size());
  for (std::size_t i : order) {
    out.items.push_back(items[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::optional<double> ndcg_at_k(const RankedList& ranked, std::size_t k) {
  check_k(k);
  const std::size_t positives = count_positives(ranked);
  if (ranked.items.empty() || positives == 0) return std::nullopt;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked.labels.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (ranked.labels[r] > 0) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(k, positives); ++r) {
    ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / ideal;
}

std::optional<double> recall_at_k(const RankedList& ranked, std::size_t k) {
  check_k(k);
  const std::size_t positives = count_positives(ranked);
  if (ranked.items.empty() || positives == 0) return std::nullopt;
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked.labels.size());
  for (std::size_t r = 0; r < depth; ++r) hits += ranked.labels[r] > 0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(std::min(k, positives));
}

RankingSummary evaluate_rankings(std::span<const UserItemLabel> test, const ScoreFn& score,
                                 std::size_t k) {
  check_k(k);
  if (test.empty()) throw ValidationError("evaluate_rankings: empty test split");
  std::map<int, std::vector<const UserItemLabel*>> by_user;
  for (const UserItemLabel& t : test) by_user[t.user].push_back(&t);

  RankingSummary summary;
  for (const auto& [user, rows] : by_user) {
    std::vector<int> items, labels;
    std::vector<double> scores;
    for (const UserItemLabel* t : rows) {
      items.push_back(t->item);
      labels.push_back(t->label);
      scores.push_back(score(user, t->item));
    }
    const RankedList ranked = rank_items(items, scores, labels);
    const auto ndcg = ndcg_at_k(ranked, k);
    if (!ndcg) continue;
    summary.ndcg += *ndcg;
    summary.recall += *recall_at_k(ranked, k);
    ++summary.users;
  }
  if (summary.users == 0) throw ValidationError("evaluate_rankings: no user has a positive");
  summary.ndcg /= static_cast<double>(summary.users);
  summary.recall /= static_cast<double>(summary.users);
  return summary;
}

}  // namespace ividr::eval
