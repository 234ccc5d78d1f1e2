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

#include <cmath>

#include "grad_helpers.h"
#include "ividr/common/error.h"
#include "ividr/datagen/generator.h"
#include "ividr/datasets/preprocess.h"
#include "ividr/eval/mcc.h"
#include "ividr/iv/reconstruction.h"
#include "ividr/numerics/linalg.h"
#include "ividr/recmodel/loss.h"
#include "temp_dir.h"

namespace ividr::iv {
namespace {

Matrix random_matrix(std::size_t r, std::size_t c, numerics::Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Mlp random_mlp0(std::size_t d_in, std::size_t d_q, numerics::Rng& rng) {
  return Mlp({d_in, 8, d_q}, numerics::Activation::kIdentity, rng);
}

TEST(BuildTreatment, SetUnionOfTrainItemsAndTarget) {
  const std::vector<std::vector<int>> by_user = {{3, 7}, {}, {2, 5}};
  numerics::Rng rng(1);
  const Matrix emb = random_matrix(10, 4, rng);
  const auto t = build_treatment(by_user, emb, 0, 9);
  EXPECT_EQ(t.items, (std::vector<int>{3, 7, 9}));
  EXPECT_EQ(t.embeddings.rows(), 3u);
  EXPECT_EQ(t.embeddings(2, 1), emb(9, 1));
  EXPECT_EQ(build_treatment(by_user, emb, 2, 5).items, (std::vector<int>{2, 5}));
  EXPECT_EQ(build_treatment(by_user, emb, 1, 4).items, (std::vector<int>{4}));
  EXPECT_THROW(build_treatment(by_user, emb, 3, 0), DomainError);
}

TEST(BuildIvMatrix, ShapesCapsAndDeterminism) {
  numerics::Rng rng(2);
  const Matrix e = random_matrix(200, 6, rng);
  std::vector<std::vector<int>> by_item(4);
  by_item[0] = {17};
  for (int u = 0; u < 150; ++u) by_item[1].push_back(u);
  by_item[2] = by_item[1];
  const auto one = build_iv_matrix(by_item, e, 0, 64, 5);
  ASSERT_TRUE(one.has_value());
  EXPECT_EQ(one->z.rows(), 6u);
  EXPECT_EQ(one->z.cols(), 1u);
  EXPECT_EQ(one->z(3, 0), e(17, 3));

  const auto big = build_iv_matrix(by_item, e, 1, 64, 5);
  ASSERT_TRUE(big.has_value());
  EXPECT_EQ(big->z.cols(), 64u);
  EXPECT_EQ(big->users.size(), 64u);
  EXPECT_EQ(big->z, build_iv_matrix(by_item, e, 1, 64, 5)->z);
  EXPECT_EQ(big->z, build_iv_matrix(by_item, e, 2, 64, 5)->z);
  EXPECT_NE(big->z, build_iv_matrix(by_item, e, 1, 64, 6)->z);
  EXPECT_FALSE(build_iv_matrix(by_item, e, 3, 64, 5).has_value());
}

TEST(Decompose, SquareInvertibleGivesExactFit) {
  numerics::Rng rng(3);
  const Mlp mlp0 = random_mlp0(5, 4, rng);
  const Matrix z = random_matrix(4, 4, rng);
  const std::vector<double> t = {0.3, -1, 0.5, 2, 0.1};
  const auto d = decompose(t, z, mlp0);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(d.fitted[k], d.transformed[k], 1e-10);
    EXPECT_NEAR(d.residual[k], 0.0, 1e-10);
  }
}

TEST(Decompose, OrthogonalInstrumentGivesZeroFit) {
  numerics::Rng rng(4);
  const Mlp mlp0 = random_mlp0(3, 5, rng);
  const std::vector<double> t = {1.0, -0.5, 0.25};
  const auto m = mlp0.evaluate(t);
  // Columns spanning the orthogonal complement of m: I − m mᵀ / ‖m‖², then
  // Gram-Schmidt is unnecessary because the projector columns already span it.
  const double mm = numerics::dot(m, m);
  Matrix z(5, 5);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) z(r, c) = (r == c ? 1.0 : 0.0) - m[r] * m[c] / mm;
  }
  const auto d = decompose(t, z, mlp0, 1e-10);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(d.fitted[k], 0.0, 1e-10);
    EXPECT_NEAR(d.residual[k], m[k], 1e-10);
  }
}

TEST(Decompose, IdentityAndResidualOrthogonality) {
  numerics::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dq = 2 + rng.uniform_int(10);
    const std::size_t n = 1 + rng.uniform_int(20);
    const Mlp mlp0 = random_mlp0(6, dq, rng);
    const Matrix z = random_matrix(dq, n, rng);
    std::vector<double> t(6);
    for (double& v : t) v = rng.normal();
    const auto d = decompose(t, z, mlp0);
    double scale = numerics::max_abs(d.transformed);
    for (std::size_t k = 0; k < dq; ++k) {
      EXPECT_LE(std::abs(d.fitted[k] + d.residual[k] - d.transformed[k]), 4e-16 * std::max(scale, 1.0));
    }
    const auto zt_r = numerics::matvec_transposed(z, d.residual);
    EXPECT_LT(numerics::max_abs(zt_r), 1e-8) << dq << "x" << n;
  }
}

TEST(Combine, ForcedModes) {
  numerics::Rng rng(6);
  Decomposition d{{1, 2, 3}, {0.5, 1.5, -1}, {0.5, 0.5, 4}};
  const Mlp m1({6, 4, 1}, numerics::Activation::kIdentity, rng);
  const Mlp m2({6, 4, 1}, numerics::Activation::kIdentity, rng);
  const std::vector<double> pool = {0.1, 0.2, 0.3};
  const auto t = combine(d, pool, m1, m2, Combination::kTreatment);
  EXPECT_EQ(t.t_re, d.transformed);
  EXPECT_EQ(t.alpha1, 1.0);
  EXPECT_EQ(t.alpha2, 1.0);
  const auto f = combine(d, pool, m1, m2, Combination::kFittedOnly);
  EXPECT_EQ(f.t_re, d.fitted);
  EXPECT_EQ(f.alpha2, 0.0);
  const auto r = combine(d, pool, m1, m2, Combination::kResidualOnly);
  EXPECT_EQ(r.t_re, d.residual);
  const auto l = combine(d, pool, m1, m2, Combination::kLearned);
  std::vector<double> in = {1, 2, 3, 0.1, 0.2, 0.3};
  EXPECT_EQ(l.alpha1, m1.evaluate(in)[0]);
  EXPECT_EQ(l.alpha2, m2.evaluate(in)[0]);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(l.t_re[k], l.alpha1 * d.fitted[k] + l.alpha2 * d.residual[k]);
}

TEST(PoolColumns, ColumnMean) {
  EXPECT_EQ(pool_columns(Matrix::from_rows({{1, 3}, {2, 6}})), (Vector{2, 4}));
}

TEST(DebiasInteractions, DegenerateCasesAndBound) {
  const Matrix x = Matrix::from_rows({{1, 0, 1}, {0, 1, 1}});
  EXPECT_EQ(debias_interactions(x, std::vector<double>{0, 0, 0}, 1.0), x);
  EXPECT_EQ(debias_interactions(x, std::vector<double>{0.4, -2, 3}, 0.0), x);
  const std::vector<double> adj = {0.4, -2, 3};
  const double s = 0.7;
  const auto xr = debias_interactions(x, adj, s);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_LE(std::abs(xr(u, j) - x(u, j)), s * 3.0 + 1e-15);
      if (x(u, j) == 0.0) EXPECT_EQ(xr(u, j), 0.0);
      else EXPECT_DOUBLE_EQ(xr(u, j), 1.0 + s * adj[j]);
    }
  }
  EXPECT_THROW(debias_interactions(x, std::vector<double>{1, 2}, 1.0), ShapeError);
}

struct Fixture {
  int n_users = 30;
  int n_items = 12;
  Matrix t, e;
  std::vector<std::vector<int>> by_item;
  std::vector<recmodel::Example> batch;
  IvConfig cfg;

  explicit Fixture(std::uint64_t seed) {
    numerics::Rng rng(seed);
    cfg.embedding_dim = 4;
    cfg.hidden = 5;
    cfg.n_max = 6;
    cfg.scale = 0.8;
    t = random_matrix(static_cast<std::size_t>(n_items), 3, rng);
    e = random_matrix(static_cast<std::size_t>(n_users), 4, rng);
    by_item.resize(static_cast<std::size_t>(n_items));
    for (int j = 0; j < n_items - 1; ++j) {
      const auto k = 1 + rng.uniform_int(9);
      for (auto u : rng.sample_without_replacement(static_cast<std::size_t>(n_users), k)) {
        by_item[static_cast<std::size_t>(j)].push_back(static_cast<int>(u));
      }
    }
    for (int k = 0; k < 25; ++k) {
      batch.push_back({static_cast<int>(rng.uniform_int(30)), static_cast<int>(rng.uniform_int(12)),
                       rng.bernoulli(0.4) ? 1.0 : 0.0});
    }
  }
};

TEST(Reconstructor, ProjectorPathMatchesLeastSquares) {
  Fixture f(7);
  numerics::Rng rng(8);
  Reconstructor rec(f.n_users, f.t, f.e, f.by_item, f.cfg, Combination::kLearned, rng);
  for (int j = 0; j < f.n_items; ++j) {
    const auto via_projector = rec.decomposition(j);
    const auto z = build_iv_matrix(f.by_item, f.e, j, f.cfg.n_max, f.cfg.seed);
    if (!z) {
      EXPECT_FALSE(rec.has_iv(j));
      EXPECT_EQ(numerics::max_abs(via_projector.fitted), 0.0);
      continue;
    }
    const auto direct = decompose(f.t.row(static_cast<std::size_t>(j)), z->z, rec.mlp0);
    EXPECT_LT(numerics::max_abs_diff(via_projector.fitted, direct.fitted), 1e-10);
    EXPECT_LT(numerics::max_abs_diff(via_projector.residual, direct.residual), 1e-10);
  }
}

class ReconstructorGrad : public ::testing::TestWithParam<Combination> {};

TEST_P(ReconstructorGrad, MatchesFiniteDifferences) {
  Fixture f(9);
  numerics::Rng rng(10);
  Reconstructor rec(f.n_users, f.t, f.e, f.by_item, f.cfg, GetParam(), rng);
  const double err = testing::check_gradients([&] { return rec.loss_and_grad(f.batch); }, rec.parameters());
  EXPECT_LT(err, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllModes, ReconstructorGrad,
                         ::testing::Values(Combination::kLearned, Combination::kTreatment, Combination::kFittedOnly,
                                           Combination::kResidualOnly),
                         [](const auto& info) { return std::string(combination_name(info.param)); });

TEST(Reconstructor, ScoreAgreesWithBatchLoss) {
  Fixture f(11);
  numerics::Rng rng(12);
  Reconstructor rec(f.n_users, f.t, f.e, f.by_item, f.cfg, Combination::kLearned, rng);
  double expected = 0;
  for (const auto& ex : f.batch) expected += recmodel::bce_with_logit(rec.score(ex.user, ex.item), ex.label);
  expected /= static_cast<double>(f.batch.size());
  EXPECT_NEAR(rec.loss_and_grad(f.batch), expected, 1e-12);
}

datasets::DataSplit desk_split(std::uint64_t seed, datagen::SyntheticDataset& ds) {
  auto cfg = datagen::preset("desk");
  cfg.n_users = 500;
  cfg.n_items = 100;
  cfg.seed = seed;
  ds = datagen::generate(cfg);
  ds.data = datasets::binarize(ds.data);
  return datasets::split(ds.data, {datasets::SplitPolicy::Kind::kBiasedUnbiased, 0.1, 0.2, seed});
}

TEST(RunIvStage, TrainsDeterministicallyAndPreservesSparsity) {
  datagen::SyntheticDataset ds;
  const auto s = desk_split(13, ds);
  recmodel::ExampleSampler sampler(ds.data.n_users, ds.data.n_items, s.train, 4);
  const auto x = datasets::build_exposure(ds.data.n_users, ds.data.n_items, s.train);
  const auto z = datasets::standardize_features(ds.data.user_features, datasets::users_in(s.train));
  IvConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 3;
  const auto a = run_iv_stage(x, sampler, z, cfg, Combination::kLearned);
  const auto b = run_iv_stage(x, sampler, z, cfg, Combination::kLearned);
  EXPECT_EQ(a.x_re, b.x_re);
  ASSERT_EQ(a.loss_history.size(), 4u);
  EXPECT_LT(a.loss_history.back(), a.loss_history.front());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x.data()[k] == 0.0) EXPECT_EQ(a.x_re.data()[k], 0.0);
  }
  // With 8 raw features the instruments span an 8-dimensional subspace, so
  // both parts are non-trivial.
  double fitted = 0, residual = 0;
  for (const auto& it : a.items) {
    fitted += it.fitted_norm;
    residual += it.residual_norm;
  }
  EXPECT_GT(fitted, 0.0);
  EXPECT_GT(residual, 0.0);
}

TEST(RunIvStage, InstrumentValidityOnSyntheticData) {
  // Independence: Z is uncorrelated with the exposure-driving confounder.
  auto cfg = datagen::preset("desk");
  cfg.seed = 21;
  const auto ds = datagen::generate(cfg);
  for (std::size_t f = 0; f < ds.data.user_features.cols(); ++f) {
    for (std::size_t d = 0; d < 2; ++d) {
      EXPECT_LT(std::abs(eval::pearson(ds.data.user_features.col(f), ds.truth.c.col(d))), 0.05);
    }
  }
  // Relevance: fitted parts move with the treatments they were fitted to.
  datagen::SyntheticDataset small;
  const auto s = desk_split(22, small);
  recmodel::ExampleSampler sampler(small.data.n_users, small.data.n_items, s.train, 4);
  const auto x = datasets::build_exposure(small.data.n_users, small.data.n_items, s.train);
  const auto z = datasets::standardize_features(small.data.user_features, datasets::users_in(s.train));
  IvConfig ivc;
  ivc.epochs = 1;
  numerics::Rng rng(1);
  const Matrix t = random_matrix(static_cast<std::size_t>(small.data.n_items), 16, rng);
  std::vector<std::vector<int>> by_item(static_cast<std::size_t>(small.data.n_items));
  for (const auto& tr : s.train) by_item[static_cast<std::size_t>(tr.item)].push_back(tr.user);
  Reconstructor rec(small.data.n_users, t, feature_embedding(z, 16, 0), by_item, ivc, Combination::kLearned, rng);
  std::vector<double> fitted, transformed;
  for (int j = 0; j < small.data.n_items; ++j) {
    if (!rec.has_iv(j)) continue;
    const auto d = rec.decomposition(j);
    fitted.insert(fitted.end(), d.fitted.begin(), d.fitted.end());
    transformed.insert(transformed.end(), d.transformed.begin(), d.transformed.end());
  }
  EXPECT_GT(eval::pearson(fitted, transformed), 0.1);
}

TEST(IvIo, XReRoundTripAndReport) {
  testing::TempDir dir;
  numerics::Rng rng(14);
  const Matrix x = random_matrix(5, 7, rng);
  write_x_re(dir.path() / "x_re.bin", x);
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "x_re.bin"), 5u * 7u * 8u);
  EXPECT_EQ(read_x_re(dir.path() / "x_re.bin", 5, 7), x);
  EXPECT_THROW(read_x_re(dir.path() / "x_re.bin", 5, 6), ValidationError);

  IvResult r;
  r.items = {{0, false, 3, 1.0, 0.5, 0.9, 1.1, 0.2}, {1, true, 0, 0, 1, 0, 1, 0}};
  r.loss_history = {0.7, 0.6};
  write_iv_report(dir.path() / "iv_report.json", r, IvConfig{});
  const auto j = nlohmann::json::parse(testing::read_file(dir.path() / "iv_report.json"));
  EXPECT_EQ(j.at("excluded_items"), 1);
  EXPECT_EQ(j.at("items").size(), 2u);
  EXPECT_DOUBLE_EQ(j.at("alpha1").at("mean").get<double>(), 0.9);
}

}  // namespace
}  // namespace ividr::iv
