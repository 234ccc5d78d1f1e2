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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "ividr/common/error.h"
#include "ividr/datasets/bundle.h"
#include "ividr/datasets/interaction_dataset.h"
#include "ividr/datasets/loaders.h"
#include "ividr/datasets/preprocess.h"
#include "ividr/numerics/rng.h"
#include "temp_dir.h"

namespace ividr::datasets {
namespace {

using numerics::Matrix;
using testing::TempDir;

// users × items dense rating matrix with exactly `per_row` non-zeros a row.
std::string dense_ascii(int users, int items, int per_row, std::uint64_t seed) {
  numerics::Rng rng(seed);
  std::ostringstream os;
  for (int u = 0; u < users; ++u) {
    std::vector<int> row(static_cast<std::size_t>(items), 0);
    for (auto k : rng.sample_without_replacement(static_cast<std::size_t>(items), static_cast<std::size_t>(per_row))) {
      row[k] = 1 + static_cast<int>(rng.uniform_int(5));
    }
    for (int i = 0; i < items; ++i) os << (i ? " " : "") << row[static_cast<std::size_t>(i)];
    os << '\n';
  }
  return os.str();
}

InteractionDataset tiny(std::vector<Interaction> triples, int users, int items) {
  InteractionDataset ds;
  ds.n_users = users;
  ds.n_items = items;
  ds.triples = std::move(triples);
  ds.user_ids = IdMap::dense(static_cast<std::size_t>(users));
  ds.item_ids = IdMap::dense(static_cast<std::size_t>(items));
  return ds;
}

TEST(LoadExplicit, CoatShapedDirectoryCounts) {
  TempDir dir;
  dir.file("train.ascii", dense_ascii(290, 300, 24, 1));
  dir.file("test.ascii", dense_ascii(290, 300, 16, 2));
  const auto ds = load_coat_directory(dir.path());
  EXPECT_EQ(ds.n_users, 290);
  EXPECT_EQ(ds.n_items, 300);
  EXPECT_EQ(ds.count(SplitTag::kBiased), 6960u);
  EXPECT_EQ(ds.count(SplitTag::kUnbiased), 4640u);
}

TEST(LoadExplicit, CoatUserFeaturesAreRead) {
  TempDir dir;
  dir.file("train.ascii", "1 0\n0 5\n");
  dir.file("test.ascii", "0 2\n3 0\n");
  dir.file("user_item_features/user_features.ascii", "1 0 1\n0 1 0\n");
  const auto ds = load_coat_directory(dir.path());
  ASSERT_EQ(ds.user_features.rows(), 2u);
  ASSERT_EQ(ds.user_features.cols(), 3u);
  EXPECT_EQ(ds.user_features(1, 1), 1.0);
}

TEST(LoadExplicit, EmptyFileGivesEmptyDataset) {
  TempDir dir;
  const auto ds = load_explicit(dir.file("empty.tsv", ""), InputFormat::kTsvTriples);
  EXPECT_EQ(ds.n_users, 0);
  EXPECT_EQ(ds.n_items, 0);
  EXPECT_TRUE(ds.triples.empty());
}

TEST(LoadExplicit, DuplicatePairIsLastWins) {
  TempDir dir;
  const auto p = dir.file("d.tsv", "a\tx\t2\tbiased\nb\ty\t3\tbiased\na\tx\t5\tbiased\n");
  const auto ds = load_explicit(p, InputFormat::kTsvTriples);
  ASSERT_EQ(ds.triples.size(), 2u);
  EXPECT_EQ(ds.triples[0].rating, 5);
  EXPECT_EQ(ds.duplicates_dropped, 1u);
}

TEST(LoadExplicit, SamePairInDifferentSplitsIsKept) {
  TempDir dir;
  const auto p = dir.file("d.tsv", "a\tx\t2\tbiased\na\tx\t4\tunbiased\n");
  const auto ds = load_explicit(p, InputFormat::kTsvTriples);
  EXPECT_EQ(ds.triples.size(), 2u);
  EXPECT_EQ(ds.duplicates_dropped, 0u);
}

TEST(LoadExplicit, MalformedLineReportsLineNumber) {
  TempDir dir;
  const auto p = dir.file("bad.tsv", "0\t0\t3\tbiased\n0\t1\tthree\tbiased\n");
  try {
    load_explicit(p, InputFormat::kTsvTriples);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadExplicit, RejectsBadSplitAndFieldCount) {
  TempDir dir;
  EXPECT_THROW(load_explicit(dir.file("a.tsv", "0\t0\t3\tmaybe\n"), InputFormat::kTsvTriples), ParseError);
  EXPECT_THROW(load_explicit(dir.file("b.tsv", "0\t0\n"), InputFormat::kTsvTriples), ParseError);
  EXPECT_THROW(load_explicit(dir.file("c.txt", "1 2\n3\n"), InputFormat::kDenseMatrix), ParseError);
}

TEST(LoadExplicit, OutOfRangeRatingIsValidationError) {
  TempDir dir;
  EXPECT_THROW(load_explicit(dir.file("r.tsv", "0\t0\t6\tbiased\n"), InputFormat::kTsvTriples), ValidationError);
  EXPECT_THROW(load_explicit(dir.file("m.txt", "0 7\n"), InputFormat::kDenseMatrix), ValidationError);
}

TEST(LoadExplicit, ReindexingIsABijection) {
  TempDir dir;
  const auto p = dir.file("ids.tsv", "u9\ti5\t1\nu2\ti5\t4\nu9\ti7\t2\tunbiased\n");
  const auto ds = load_explicit(p, InputFormat::kTsvTriples);
  EXPECT_EQ(ds.n_users, 2);
  EXPECT_EQ(ds.n_items, 2);
  for (int u = 0; u < ds.n_users; ++u) EXPECT_EQ(ds.user_ids.find(ds.user_ids.original(u)), u);
  for (const std::string id : {"i5", "i7"}) EXPECT_EQ(ds.item_ids.original(*ds.item_ids.find(id)), id);
}

TEST(LoadExplicit, TsvRoundTrip) {
  TempDir dir;
  const auto p = dir.file("in.tsv", "x\tp\t1\tbiased\ny\tq\t5\tunbiased\n");
  const auto ds = load_explicit(p, InputFormat::kTsvTriples);
  const auto q = dir.path() / "out.tsv";
  write_triples_tsv(ds, q);
  const auto again = load_explicit(q, InputFormat::kTsvTriples);
  EXPECT_EQ(again.triples, ds.triples);
}

TEST(Binarize, ThresholdDefinition) {
  auto ds = tiny({{0, 0, 1, SplitTag::kBiased}, {0, 1, 3, SplitTag::kBiased}, {0, 2, 4, SplitTag::kBiased},
                  {0, 3, 5, SplitTag::kBiased}},
                 1, 4);
  auto labels = [](const InteractionDataset& d) {
    std::vector<int> r;
    for (const auto& t : d.triples) r.push_back(t.rating);
    return r;
  };
  EXPECT_EQ(labels(binarize(ds)), (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(labels(binarize(ds, 1)), (std::vector<int>{1, 1, 1, 1}));
  EXPECT_EQ(labels(binarize(ds, 6)), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_THROW(binarize(binarize(ds)), ValidationError);
  EXPECT_NO_THROW(binarize(ds).validate());
}

TEST(BuildExposure, EdgeCasesAndDensity) {
  EXPECT_EQ(build_exposure(tiny({}, 3, 4)), Matrix(3, 4));
  const auto one = build_exposure(tiny({{0, 0, 3, SplitTag::kBiased}}, 2, 2));
  EXPECT_EQ(one, Matrix::from_rows({{1, 0}, {0, 0}}));

  numerics::Rng rng(5);
  std::vector<Interaction> triples;
  std::set<std::pair<int, int>> train;
  for (int k = 0; k < 400; ++k) {
    const int u = static_cast<int>(rng.uniform_int(30)), i = static_cast<int>(rng.uniform_int(40));
    const bool biased = rng.bernoulli(0.7);
    if (biased && !train.insert({u, i}).second) continue;
    triples.push_back({u, i, 3, biased ? SplitTag::kBiased : SplitTag::kUnbiased});
  }
  const auto a = build_exposure(tiny(triples, 30, 40));
  double total = 0;
  for (double v : a.data()) total += v;
  EXPECT_DOUBLE_EQ(total / (30.0 * 40.0), static_cast<double>(train.size()) / (30.0 * 40.0));
}

TEST(BuildProxy, PassThroughAndMissing) {
  auto ds = tiny({}, 3, 1);
  EXPECT_THROW(build_proxy(ds, {ProxyRule::Kind::kPassThrough, 0}), ConfigError);
  ds.proxy = {2, 0, 1};
  ds.n_proxy_categories = 3;
  const auto w = build_proxy(ds, {ProxyRule::Kind::kPassThrough, 0});
  EXPECT_EQ(w.values, ds.proxy);
  EXPECT_EQ(w.categories, 3);
}

TEST(BuildProxy, MeanRatingQuartileMatchesQuantileOracle) {
  // Eight users with mean biased ratings 1..5 spread; one user without train data.
  std::vector<Interaction> triples;
  const std::vector<std::vector<int>> ratings = {{1}, {1, 2}, {2}, {3, 2}, {3}, {4, 3}, {4}, {5}};
  for (int u = 0; u < 8; ++u) {
    int item = 0;
    for (int r : ratings[static_cast<std::size_t>(u)]) triples.push_back({u, item++, r, SplitTag::kBiased});
  }
  triples.push_back({8, 0, 5, SplitTag::kUnbiased});
  auto ds = tiny(triples, 9, 3);
  const auto w = build_proxy(ds, {ProxyRule::Kind::kMeanRatingQuartile, 0});
  EXPECT_EQ(w.categories, 4);
  // Oracle: sorted means {1, 1.5, 2, 2.5, 3, 3.5, 4, 5}; positions 1.75, 3.5, 5.25.
  const double q1 = 1.5 + 0.75 * 0.5, q2 = 2.5 + 0.5 * 0.5, q3 = 3.5 + 0.25 * 0.5;
  const std::vector<double> means = {1, 1.5, 2, 2.5, 3, 3.5, 4, 5};
  for (int u = 0; u < 8; ++u) {
    const double m = means[static_cast<std::size_t>(u)];
    EXPECT_EQ(w.values[static_cast<std::size_t>(u)], (m > q1) + (m > q2) + (m > q3)) << u;
  }
  // The user without training data gets the global training mean (23/12).
  EXPECT_EQ(w.values[8], 1);
}

TEST(BuildProxy, IgnoresTestSplit) {
  std::vector<Interaction> triples = {{0, 0, 1, SplitTag::kBiased}, {1, 0, 3, SplitTag::kBiased},
                                      {2, 0, 5, SplitTag::kBiased}, {3, 0, 4, SplitTag::kBiased}};
  auto a = tiny(triples, 4, 2);
  triples.push_back({0, 1, 5, SplitTag::kUnbiased});
  triples.push_back({2, 1, 1, SplitTag::kUnbiased});
  auto b = tiny(triples, 4, 2);
  const ProxyRule rule{ProxyRule::Kind::kMeanRatingQuartile, 0};
  EXPECT_EQ(build_proxy(a, rule).values, build_proxy(b, rule).values);
}

TEST(BuildProxy, FeatureColumn) {
  auto ds = tiny({}, 4, 1);
  ds.user_features = Matrix::from_rows({{7, 3}, {7, 1}, {7, 3}, {7, 2}});
  const auto constant = build_proxy(ds, {ProxyRule::Kind::kFeatureColumn, 0});
  EXPECT_EQ(constant.categories, 1);
  EXPECT_EQ(constant.values, (std::vector<int>{0, 0, 0, 0}));
  const auto levels = build_proxy(ds, {ProxyRule::Kind::kFeatureColumn, 1});
  EXPECT_EQ(levels.categories, 3);
  EXPECT_EQ(levels.values, (std::vector<int>{2, 0, 2, 1}));
  EXPECT_THROW(build_proxy(ds, {ProxyRule::Kind::kFeatureColumn, 2}), ConfigError);
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.9), 5.0);
  EXPECT_THROW(quantile({}, 0.5), DomainError);
}

InteractionDataset coat_like() {
  std::vector<Interaction> triples;
  numerics::Rng rng(9);
  for (int u = 0; u < 290; ++u) {
    for (auto i : rng.sample_without_replacement(300, 24)) {
      triples.push_back({u, static_cast<int>(i), 1 + static_cast<int>(rng.uniform_int(5)), SplitTag::kBiased});
    }
    for (auto i : rng.sample_without_replacement(300, 16)) {
      triples.push_back({u, static_cast<int>(i), 1 + static_cast<int>(rng.uniform_int(5)), SplitTag::kUnbiased});
    }
  }
  return tiny(triples, 290, 300);
}

TEST(Split, CoatPolicyCounts) {
  const auto ds = coat_like();
  const auto s = split(ds, {SplitPolicy::Kind::kBiasedUnbiased, 0.1, 0.2, 3});
  EXPECT_EQ(s.train.size() + s.validation.size(), 6960u);
  EXPECT_EQ(s.validation.size(), 696u);
  EXPECT_EQ(s.test.size(), 4640u);
  for (const auto& t : s.train) EXPECT_EQ(t.split, SplitTag::kBiased);
  for (const auto& t : s.test) EXPECT_EQ(t.split, SplitTag::kUnbiased);
}

TEST(Split, SeedChangesValidationNotTest) {
  const auto ds = coat_like();
  const auto a = split(ds, {SplitPolicy::Kind::kBiasedUnbiased, 0.1, 0.2, 1});
  const auto a2 = split(ds, {SplitPolicy::Kind::kBiasedUnbiased, 0.1, 0.2, 1});
  const auto b = split(ds, {SplitPolicy::Kind::kBiasedUnbiased, 0.1, 0.2, 2});
  EXPECT_EQ(a.validation, a2.validation);
  EXPECT_NE(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, RandomHoldoutPartitionsEverything) {
  const auto ds = coat_like();
  const auto s = split(ds, {SplitPolicy::Kind::kRandomHoldout, 0.1, 0.2, 4});
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), ds.triples.size());
  EXPECT_EQ(s.test.size(), static_cast<std::size_t>(0.2 * ds.triples.size()));
}

TEST(Split, EmptyOrInvalidIsValidationError) {
  auto only_biased = tiny({{0, 0, 3, SplitTag::kBiased}}, 1, 1);
  EXPECT_THROW(split(only_biased, {}), ValidationError);
  auto only_test = tiny({{0, 0, 3, SplitTag::kUnbiased}}, 1, 1);
  EXPECT_THROW(split(only_test, {}), ValidationError);
  EXPECT_THROW(split(coat_like(), {SplitPolicy::Kind::kRandomHoldout, 0.1, 1.0, 0}), ValidationError);
  EXPECT_THROW(split(coat_like(), {SplitPolicy::Kind::kBiasedUnbiased, 1.5, 0.2, 0}), ValidationError);
}

TEST(StandardizeFeatures, UsesTrainStatisticsOnly) {
  Matrix f = Matrix::from_rows({{1, 5}, {3, 5}, {5, 5}, {100, -3}});
  const std::vector<int> train = {0, 1, 2};
  const auto z = standardize_features(f, train);
  double mean = 0, var = 0;
  for (int u : train) mean += z(static_cast<std::size_t>(u), 0);
  for (int u : train) var += z(static_cast<std::size_t>(u), 0) * z(static_cast<std::size_t>(u), 0);
  EXPECT_NEAR(mean / 3, 0.0, 1e-12);
  EXPECT_NEAR(var / 3, 1.0, 1e-12);
  // Constant column is centred, not scaled.
  EXPECT_EQ(z(0, 1), 0.0);
  EXPECT_EQ(z(3, 1), -8.0);
  // Changing a non-train user leaves train users untouched.
  f(3, 0) = -7;
  const auto z2 = standardize_features(f, train);
  for (int u : train) EXPECT_EQ(z(static_cast<std::size_t>(u), 0), z2(static_cast<std::size_t>(u), 0));
}

TEST(Bundle, BitPackingRoundTrip) {
  numerics::Rng rng(3);
  Matrix a(7, 13);
  for (double& v : a.data()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  const auto bytes = pack_bits(a);
  EXPECT_EQ(bytes.size(), (7u * 13u + 7u) / 8u);
  EXPECT_EQ(unpack_bits(bytes, 7, 13), a);
  Matrix first(1, 9);
  first(0, 0) = 1;
  first(0, 8) = 1;
  EXPECT_EQ(pack_bits(first), (std::vector<std::uint8_t>{0x01, 0x01}));
  EXPECT_THROW(unpack_bits(bytes, 8, 13), ValidationError);
}

TEST(Bundle, WriteReadRoundTrip) {
  TempDir dir;
  auto ds = tiny({{0, 1, 4, SplitTag::kBiased}, {1, 0, 2, SplitTag::kBiased}, {1, 2, 5, SplitTag::kUnbiased}}, 2, 3);
  ds.proxy = {1, 0};
  ds.n_proxy_categories = 2;
  ds.user_features = Matrix::from_rows({{0.1, -2.5}, {1.0 / 3.0, 7.0}});
  const auto a = build_exposure(ds);
  const auto c = Matrix::from_rows({{0.2, 0.3}, {-1e-300, 4.0}});
  write_bundle(dir.path(), ds, a, &c, {{"seed", 11}});
  const auto b = read_bundle(dir.path());
  EXPECT_EQ(b.data.triples, ds.triples);
  EXPECT_EQ(b.data.proxy, ds.proxy);
  EXPECT_EQ(b.data.user_features, ds.user_features);
  EXPECT_EQ(b.exposure, a);
  ASSERT_TRUE(b.ground_truth_c.has_value());
  EXPECT_EQ(*b.ground_truth_c, c);
  EXPECT_EQ(b.meta.at("seed"), 11);
  EXPECT_EQ(b.meta.at("n_biased"), 2);
}

TEST(Bundle, ExposureMustCoverBiasedTriples) {
  TempDir dir;
  auto ds = tiny({{0, 1, 4, SplitTag::kBiased}}, 1, 2);
  write_bundle(dir.path(), ds, Matrix(1, 2), nullptr, {});
  EXPECT_THROW(read_bundle(dir.path()), ValidationError);
}

TEST(Bundle, MissingDirectoryIsIoError) {
  EXPECT_THROW(read_bundle("/nonexistent/ividr/bundle"), IoError);
}

TEST(DatasetMeta, EchoesCounts) {
  TempDir dir;
  const auto ds = coat_like();
  write_dataset_meta(ds, dir.path() / "dataset.meta.json");
  const auto text = testing::read_file(dir.path() / "dataset.meta.json");
  EXPECT_NE(text.find("\"n_biased\": 6960"), std::string::npos);
  EXPECT_NE(text.find("\"n_unbiased\": 4640"), std::string::npos);
}

}  // namespace
}  // namespace ividr::datasets
