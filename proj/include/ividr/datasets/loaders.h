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

#ifndef IVIDR_DATASETS_LOADERS_H_
#define IVIDR_DATASETS_LOADERS_H_

#include <filesystem>
#include <string>

#include "ividr/datasets/interaction_dataset.h"

namespace ividr::datasets {

enum class InputFormat {
  // `user\titem\trating\tsplit` per line, split ∈ {biased, unbiased}.
  kTsvTriples,
  // Whitespace-separated users × items rating matrix, 0 = missing
  // (the Coat `*.ascii` layout). Every entry gets `dense_split`.
  kDenseMatrix,
};

// Parses explicit feedback, reindexes ids densely and checks ratings are in
// 1..5. Duplicate (user, item, split) keys keep the last line and are counted
// in `duplicates_dropped`. Throws ParseError (with line number) on malformed
// lines and ValidationError on out-of-range ratings.
InteractionDataset load_explicit(const std::filesystem::path& path, InputFormat format,
                                 SplitTag dense_split = SplitTag::kBiased);

// Coat directory layout: train.ascii (biased), test.ascii (unbiased) and,
// if present, user_item_features/user_features.ascii or user_features.ascii.
InteractionDataset load_coat_directory(const std::filesystem::path& dir);

// Dense whitespace-separated real matrix (one row per line).
numerics::Matrix load_dense_matrix(const std::filesystem::path& path);

// Writes triples in the TSV layout accepted by load_explicit.
void write_triples_tsv(const InteractionDataset& ds, const std::filesystem::path& path);

}  // namespace ividr::datasets

#endif  // IVIDR_DATASETS_LOADERS_H_
