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

#ifndef IVIDR_RECMODEL_EXAMPLES_H_
#define IVIDR_RECMODEL_EXAMPLES_H_

#include <vector>

#include "ividr/datasets/interaction_dataset.h"
#include "ividr/eval/ranking.h"
#include "ividr/numerics/rng.h"

namespace ividr::recmodel {

// One BCE training example.
struct Example {
  int user;
  int item;
  double label;
};

// Builds per-epoch BCE examples from binarized training triples: every
// observed triple with its label (rating-derived negatives included), plus
// `negatives` uniformly drawn unobserved items per observed positive.
class ExampleSampler {
 public:
  ExampleSampler(int n_users, int n_items, std::vector<datasets::Interaction> train, int negatives);

  // Shuffled examples for one epoch.
  std::vector<Example> epoch(numerics::Rng& rng) const;
  bool observed(int user, int item) const;
  int n_users() const { return n_users_; }
  int n_items() const { return n_items_; }
  std::size_t positives() const { return positives_; }
  const std::vector<datasets::Interaction>& train() const { return train_; }
  // Items observed for each user in the training triples, ascending.
  const std::vector<std::vector<int>>& items_by_user() const { return items_by_user_; }

 private:
  int n_users_;
  int n_items_;
  int negatives_;
  std::vector<datasets::Interaction> train_;
  std::vector<std::vector<int>> items_by_user_;
  std::size_t positives_ = 0;
};

// Binarized triples as ranking labels. Throws ValidationError on a rating
// other than 0 or 1.
std::vector<eval::UserItemLabel> to_labels(const std::vector<datasets::Interaction>& triples);

}  // namespace ividr::recmodel

#endif  // IVIDR_RECMODEL_EXAMPLES_H_
