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

#ifndef IVIDR_DATASETS_BUNDLE_H_
#define IVIDR_DATASETS_BUNDLE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ividr/datasets/interaction_dataset.h"
#include "ividr/numerics/matrix.h"
#include "json.hpp"

namespace ividr::datasets {

// On-disk dataset directory:
//   interactions.tsv     user \t item \t rating \t split
//   exposure.bin         n_users × n_items bits, row-major, LSB-first
//   proxies.tsv          user \t w
//   features.tsv         user \t z_0 \t ... \t z_{d-1}
//   ground_truth_c.tsv   user \t c_0 \t ... (synthetic data only)
//   meta.json            counts, config echo, seed
// Reals are printed with 17 significant digits so a bundle round-trips
// exactly and the same seed gives byte-identical files.
struct Bundle {
  InteractionDataset data;
  numerics::Matrix exposure;
  // Evaluation only; never handed to training code.
  std::optional<numerics::Matrix> ground_truth_c;
  nlohmann::ordered_json meta;
};

// `meta` is written after the standard count fields are filled in.
void write_bundle(const std::filesystem::path& dir, const InteractionDataset& data,
                  const numerics::Matrix& exposure, const numerics::Matrix* ground_truth_c,
                  nlohmann::ordered_json meta);

// Throws IoError for missing files, ParseError for malformed content and
// ValidationError when the exposure does not cover the biased triples.
Bundle read_bundle(const std::filesystem::path& dir);

std::vector<std::uint8_t> pack_bits(const numerics::Matrix& binary);
numerics::Matrix unpack_bits(const std::vector<std::uint8_t>& bytes, std::size_t rows, std::size_t cols);

}  // namespace ividr::datasets

#endif  // IVIDR_DATASETS_BUNDLE_H_
