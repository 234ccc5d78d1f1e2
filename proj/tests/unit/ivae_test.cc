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

#include "ividr/ivae/ivae.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grad_helpers.h"
#include "ividr/common/error.h"
#include "ividr/datagen/generator.h"
#include "ividr/eval/mcc.h"
#include "ividr/numerics/gaussian.h"
#include "temp_dir.h"

namespace ividr::ivae {
namespace {

IvaeConfig small_config(int latent = 2) {
  IvaeConfig cfg;
  cfg.latent_dim = latent;
  cfg.encoder_hidden = 5;
  cfg.decoder_hidden = 4;
  return cfg;
}

IvaeModel small_model(const IvaeConfig& cfg, int n_in = 6, int n_out = 6, int n_cat = 3, std::uint64_t seed = 1) {
  numerics::Rng rng(seed);
  return IvaeModel(n_in, n_out, n_cat, cfg, rng);
}

Matrix bernoulli_rows(std::size_t n, std::size_t d, double p, std::uint64_t seed) {
  numerics::Rng rng(seed);
  Matrix m(n, d);
  for (double& v : m.data()) v = rng.uniform() < p ? 1.0 : 0.0;
  return m;
}

double sigmoid_ref(double l) { return 1.0 / (1.0 + std::exp(-l)); }

TEST(IvaePrior, UntrainedIsStandardNormal) {
  const auto model = small_model(small_config());
  for (int w = 0; w < 3; ++w) {
    const auto p = model.prior_params(w);
    EXPECT_EQ(p.mean, (Vector{0.0, 0.0}));
    EXPECT_EQ(p.var, (Vector{1.0, 1.0}));
  }
  const auto a = model.prior_params(1);
  const auto b = model.prior_params(1);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.var, b.var);
}

TEST(IvaePrior, UnseenCategoryFallsBack) {
  auto model = small_model(small_config());
  for (double& v : model.prior_mean.value) v = 3.0;
  EXPECT_EQ(model.prior_params(1).mean[0], 3.0);
  for (int w : {-1, 3, 99}) {
    const auto p = model.prior_params(w);
    EXPECT_EQ(p.mean, (Vector{0.0, 0.0}));
    EXPECT_EQ(p.var, (Vector{1.0, 1.0}));
  }
}

TEST(IvaeEncode, DeterministicWithPositiveVariance) {
  const auto model = small_model(small_config());
  numerics::Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Vector row(6);
    for (double& v : row) v = 3.0 * rng.normal();
    const int w = static_cast<int>(rng.uniform_int(3));
    const auto a = model.encode(row, w);
    const auto b = model.encode(row, w);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.var, b.var);
    for (double v : a.var) EXPECT_GT(v, 0.0);
  }
  EXPECT_THROW(model.encode(Vector(5, 0.0), 0), ShapeError);
  EXPECT_THROW(model.decode(Vector(3, 0.0)), ShapeError);
}

TEST(IvaeEncode, VarianceStaysPositiveAtClampLimits) {
  auto model = small_model(small_config());
  // Drive the log-variance outputs far past both clamp limits.
  auto& bias = model.encoder.bias(model.encoder.num_layers() - 1);
  bias.value[2] = -1e4;
  bias.value[3] = 1e4;
  const auto g = model.encode(Vector(6, 0.0), 0);
  EXPECT_GT(g.var[0], 0.0);
  EXPECT_NEAR(std::log(g.var[0]), -10.0, 0.5);
  EXPECT_NEAR(std::log(g.var[1]), 10.0, 0.5);
}

TEST(IvaeDecode, OutputsClampedToOpenInterval) {
  auto model = small_model(small_config());
  auto& bias = model.decoder.bias(model.decoder.num_layers() - 1);
  for (std::size_t i = 0; i < bias.value.size(); ++i) bias.value[i] = i % 2 == 0 ? 80.0 : -80.0;
  const auto out = model.decode(Vector{0.0, 0.0});
  for (double v : out) {
    EXPECT_GE(v, kProbabilityClamp);
    EXPECT_LE(v, 1.0 - kProbabilityClamp);
  }
  EXPECT_EQ(out[0], 1.0 - kProbabilityClamp);
  EXPECT_EQ(out[1], kProbabilityClamp);
}

TEST(IvaeDecode, LogLikelihoodMatchesBernoulliLogPmf) {
  const auto model = small_model(small_config());
  numerics::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector c{rng.normal(), rng.normal()};
    Vector a(6);
    for (double& v : a) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    const Vector logits = model.decode_raw(c);
    double oracle = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double mu = sigmoid_ref(logits[i]);
      oracle += a[i] * std::log(mu) + (1.0 - a[i]) * std::log(1.0 - mu);
    }
    EXPECT_NEAR(model.log_likelihood(a, c), oracle, 1e-10);
  }
}

TEST(IvaeDecode, LogLikelihoodMatchesGaussianLogPdf) {
  auto cfg = small_config();
  cfg.likelihood = Likelihood::kGaussian;
  cfg.gaussian_variance = 0.3;
  const auto model = small_model(cfg);
  const Vector c{0.4, -1.1};
  const Vector x{0.1, 0.2, -0.3, 1.0, 0.0, 2.0};
  const Vector mean = model.decode(c);
  EXPECT_NEAR(model.log_likelihood(x, c), numerics::gaussian_log_pdf(x, mean, Vector(6, 0.3)), 1e-10);
}

TEST(IvaeDecode, AllZeroRowLikelihoodApproachesZero) {
  auto model = small_model(small_config());
  const Vector zeros(6, 0.0);
  const Vector c{0.2, 0.3};
  double previous = -INFINITY;
  for (double b : {0.0, -2.0, -5.0, -10.0, -20.0}) {
    auto& bias = model.decoder.bias(model.decoder.num_layers() - 1);
    std::fill(bias.value.begin(), bias.value.end(), b);
    const double ll = model.log_likelihood(zeros, c);
    EXPECT_LE(ll, 0.0);
    EXPECT_GT(ll, previous);
    previous = ll;
  }
  EXPECT_GT(previous, -1e-3);
}

TEST(IvaeElbo, KlVanishesWhenPosteriorEqualsPrior) {
  auto model = small_model(small_config());
  // Zero encoder output layer: posterior N(0, I) equals the untrained prior.
  const std::size_t last = model.encoder.num_layers() - 1;
  std::fill(model.encoder.weight(last).value.begin(), model.encoder.weight(last).value.end(), 0.0);
  std::fill(model.encoder.bias(last).value.begin(), model.encoder.bias(last).value.end(), 0.0);
  const Vector row{1, 0, 1, 0, 0, 1};
  numerics::Rng a(9), b(9);
  const double elbo = model.elbo(row, row, 2, a);
  const auto draw = numerics::gaussian_sample(Vector{0.0, 0.0}, Vector{1.0, 1.0}, b);
  EXPECT_DOUBLE_EQ(elbo, model.log_likelihood(row, draw.sample));
}

TEST(IvaeElbo, BelowImportanceSampledMarginal) {
  auto cfg = small_config(1);
  auto model = small_model(cfg, 6, 6, 2, 11);
  model.prior_mean.value = {0.5, -0.5};
  model.prior_logvar.value = {-0.3, 0.2};
  const Vector row{1, 0, 0, 1, 1, 0};
  const int w = 1;
  numerics::Rng rng(12);

  const int n_elbo = 4000;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n_elbo; ++k) {
    const double e = model.elbo(row, row, w, rng);
    sum += e;
    sum_sq += e * e;
  }
  const double elbo = sum / n_elbo;
  const double elbo_se = std::sqrt((sum_sq / n_elbo - elbo * elbo) / n_elbo);

  const auto q = model.encode(row, w);
  const auto p = model.prior_params(w);
  const int n_is = 1000;
  std::vector<double> log_w(n_is);
  for (int k = 0; k < n_is; ++k) {
    const auto c = numerics::gaussian_sample(q.mean, q.var, rng).sample;
    log_w[k] = model.log_likelihood(row, c) + numerics::gaussian_log_pdf(c, p.mean, p.var) -
               numerics::gaussian_log_pdf(c, q.mean, q.var);
  }
  const double m = *std::max_element(log_w.begin(), log_w.end());
  double s = 0.0, s2 = 0.0;
  for (double lw : log_w) {
    const double r = std::exp(lw - m);
    s += r;
    s2 += r * r;
  }
  const double mean_ratio = s / n_is;
  const double log_marginal = m + std::log(mean_ratio);
  // Delta-method standard error of the log of the importance-weight mean.
  const double ratio_se = std::sqrt(std::max(s2 / n_is - mean_ratio * mean_ratio, 0.0) / n_is);
  const double log_se = ratio_se / mean_ratio;
  EXPECT_LE(elbo, log_marginal + 2.0 * std::hypot(elbo_se, log_se));
}

class IvaeGradient : public ::testing::TestWithParam<Likelihood> {};

TEST_P(IvaeGradient, MatchesFiniteDifferences) {
  auto cfg = small_config();
  cfg.likelihood = GetParam();
  cfg.gaussian_variance = 0.5;
  auto model = small_model(cfg, 6, 5, 3, 21);
  numerics::Rng init(22);
  for (double& v : model.prior_mean.value) v = init.normal();
  for (double& v : model.prior_logvar.value) v = 0.5 * init.normal();
  const Matrix inputs = bernoulli_rows(8, 6, 0.4, 23);
  Matrix targets = bernoulli_rows(8, 5, 0.4, 24);
  if (GetParam() == Likelihood::kGaussian) {
    for (double& v : targets.data()) v += 0.3 * init.normal();
  }
  const std::vector<int> w{0, 1, 2, 0, 1, 2, 1, 0};
  const std::vector<std::size_t> users{0, 2, 3, 5, 6, 7};
  auto loss = [&] {
    numerics::Rng rng(25);
    return model.loss_and_grad(users, inputs, targets, w, rng);
  };
  EXPECT_LT(testing::check_gradients(loss, model.parameters()), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Likelihoods, IvaeGradient, ::testing::Values(Likelihood::kBernoulli, Likelihood::kGaussian),
                         [](const auto& info) {
                           return std::string(info.param == Likelihood::kBernoulli ? "Bernoulli" : "Gaussian");
                         });

TEST(IvaeGradient, KlNonNegativeDuringTraining) {
  auto g = datagen::preset("desk");
  g.n_users = 300;
  g.n_items = 80;
  g.alpha = 0.3;
  const auto ds = datagen::generate(g);
  auto cfg = IvaeConfig{};
  cfg.seed = 3;
  numerics::Rng init(3);
  IvaeModel model(80, 80, ds.data.n_proxy_categories, cfg, init);
  auto params = model.parameters();
  numerics::Adam opt(params, cfg.adam);
  numerics::Rng rng(4);
  std::vector<std::size_t> users(300);
  std::iota(users.begin(), users.end(), 0);
  for (int step = 0; step < 30; ++step) {
    opt.zero_grad();
    model.loss_and_grad(std::span<const std::size_t>(users.data() + (step % 4) * 64, 64), ds.exposure, ds.exposure,
                        ds.data.proxy, rng);
    opt.step();
    for (std::size_t u = 0; u < 300; u += 7) {
      const auto q = model.encode(ds.exposure.row(u), ds.data.proxy[u]);
      const auto p = model.prior_params(ds.data.proxy[u]);
      const double kl = numerics::kl_gaussian_diag(q.mean, q.var, p.mean, p.var);
      ASSERT_TRUE(std::isfinite(kl));
      ASSERT_GE(kl, 0.0);
    }
  }
}

TEST(IvaeTrain, ElboRisesOverFirstSteps) {
  auto g = datagen::preset("desk");
  g.seed = 5;
  const auto ds = datagen::generate(g);
  IvaeConfig cfg;
  cfg.seed = 5;
  numerics::Rng init(5);
  IvaeModel model(g.n_items, g.n_items, ds.data.n_proxy_categories, cfg, init);
  auto params = model.parameters();
  numerics::Adam opt(params, cfg.adam);
  numerics::Rng rng(6);
  std::vector<std::size_t> order(static_cast<std::size_t>(g.n_users));
  std::iota(order.begin(), order.end(), 0);
  // Tracked on a fixed user set with fixed per-user noise so only the
  // parameters change between evaluations.
  std::vector<std::size_t> probe(256);
  std::iota(probe.begin(), probe.end(), 0);
  std::vector<double> elbo;
  std::size_t cursor = order.size();
  for (int step = 0; step < 200; ++step) {
    if (cursor + cfg.batch_size > order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    opt.zero_grad();
    model.loss_and_grad(std::span<const std::size_t>(order.data() + cursor, cfg.batch_size), ds.exposure,
                        ds.exposure, ds.data.proxy, rng);
    opt.step();
    elbo.push_back(mean_elbo(model, probe, ds.exposure, ds.exposure, ds.data.proxy, 77));
    cursor += cfg.batch_size;
  }
  double previous = -INFINITY;
  for (int window = 0; window < 20; ++window) {
    const double mean = std::accumulate(elbo.begin() + window * 10, elbo.begin() + window * 10 + 10, 0.0) / 10.0;
    EXPECT_GT(mean, previous) << "window " << window;
    previous = mean;
  }
}

struct TinyData {
  Matrix x;
  std::vector<int> w;
};

TinyData tiny_data(std::size_t n, std::uint64_t seed) {
  auto g = datagen::preset("desk");
  g.n_users = static_cast<int>(n);
  g.n_items = 40;
  g.alpha = 0.4;
  g.unbiased_per_user = 10;
  g.seed = seed;
  auto ds = datagen::generate(g);
  return {ds.exposure, ds.data.proxy};
}

TEST(IvaeTrain, SameSeedGivesIdenticalParameters) {
  const auto d = tiny_data(120, 7);
  IvaeConfig cfg = small_config();
  cfg.max_epochs = 4;
  cfg.seed = 8;
  auto a = train_ivae(d.x, d.x, d.w, 5, cfg);
  auto b = train_ivae(d.x, d.x, d.w, 5, cfg);
  EXPECT_EQ(numerics::flatten_values(a.model.parameters()), numerics::flatten_values(b.model.parameters()));
  EXPECT_EQ(a.validation_elbo, b.validation_elbo);
  cfg.seed = 9;
  auto c = train_ivae(d.x, d.x, d.w, 5, cfg);
  EXPECT_NE(numerics::flatten_values(a.model.parameters()), numerics::flatten_values(c.model.parameters()));
}

TEST(IvaeTrain, RestoresBestValidationCheckpoint) {
  const auto d = tiny_data(200, 10);
  IvaeConfig cfg = small_config();
  cfg.max_epochs = 30;
  cfg.patience = 3;
  cfg.adam.learning_rate = 0.05;
  cfg.seed = 11;
  auto res = train_ivae(d.x, d.x, d.w, 5, cfg);
  ASSERT_GE(res.best_epoch, 0);
  EXPECT_EQ(res.best_validation_elbo,
            *std::max_element(res.validation_elbo.begin(), res.validation_elbo.end()));
  EXPECT_LE(res.validation_elbo.size(), static_cast<std::size_t>(res.best_epoch + 1 + cfg.patience));
  // The returned model reproduces the best validation score.
  std::vector<std::size_t> all(d.x.rows());
  std::iota(all.begin(), all.end(), 0);
  auto holdout_rng = numerics::Rng::derive(cfg.seed, 0x12);
  const auto val = holdout_rng.sample_without_replacement(d.x.rows(), d.x.rows() / 5);
  std::vector<std::size_t> val_users(val.begin(), val.end());
  std::sort(val_users.begin(), val_users.end());
  EXPECT_DOUBLE_EQ(mean_elbo(res.model, val_users, d.x, d.x, d.w, cfg.seed), res.best_validation_elbo);
}

TEST(IvaeTrain, DivergenceRaisesNumericError) {
  auto d = tiny_data(50, 12);
  d.x(3, 2) = std::nan("");
  IvaeConfig cfg = small_config();
  cfg.max_epochs = 2;
  EXPECT_THROW(train_ivae(d.x, d.x, d.w, 5, cfg), NumericError);
}

TEST(IvaeTrain, RejectsMisalignedInputs) {
  const auto d = tiny_data(50, 13);
  EXPECT_THROW(train_ivae(d.x, d.x, std::vector<int>(49, 0), 5, small_config()), ShapeError);
  IvaeConfig bad = small_config();
  bad.latent_dim = 0;
  EXPECT_THROW(train_ivae(d.x, d.x, d.w, 5, bad), ConfigError);
}

GaussianPosterior random_posterior(std::size_t n, std::size_t d, std::uint64_t seed) {
  numerics::Rng rng(seed);
  GaussianPosterior p{Matrix(n, d), Matrix(n, d)};
  for (double& v : p.mean.data()) v = rng.normal();
  for (double& v : p.var.data()) v = 0.1 + rng.uniform();
  return p;
}

TEST(IvaeFusion, RhoOneTauZeroIsFirst) {
  const auto a = random_posterior(10, 2, 1);
  const auto b = random_posterior(10, 2, 2);
  FusedConfounder f(a, b, 1.0, 0.0);
  EXPECT_EQ(f.mean().data(), a.mean.data());
  numerics::Rng r1(3), r2(3);
  for (std::size_t u = 0; u < 10; ++u) {
    const auto fused = f.sample(u, r1);
    const auto first = numerics::gaussian_sample(a.mean.row(u), a.var.row(u), r2).sample;
    numerics::gaussian_sample(b.mean.row(u), b.var.row(u), r2);
    EXPECT_EQ(fused, first);
  }
}

TEST(IvaeFusion, MeanIsLinear) {
  const auto a = random_posterior(12, 2, 4);
  const auto b = random_posterior(12, 2, 5);
  const auto c = random_posterior(12, 2, 6);
  const auto d = random_posterior(12, 2, 7);
  const double rho = 0.9, tau = 0.9;
  const Matrix lhs = FusedConfounder(a, b, rho, tau).mean() + FusedConfounder(c, d, rho, tau).mean();
  GaussianPosterior ac{a.mean + c.mean, a.var};
  GaussianPosterior bd{b.mean + d.mean, b.var};
  EXPECT_LT(numerics::max_abs_diff(lhs, FusedConfounder(ac, bd, rho, tau).mean()), 1e-12);
}

TEST(IvaeFusion, SampleMomentsMatch) {
  const auto a = random_posterior(1, 2, 8);
  const auto b = random_posterior(1, 2, 9);
  const Matrix fused_draws = [&] {
    numerics::Rng rng(10);
    FusedConfounder f(a, b, 0.9, 0.9);
    Matrix m(20000, 2);
    for (std::size_t k = 0; k < 20000; ++k) {
      const auto s = f.sample(0, rng);
      m(k, 0) = s[0];
      m(k, 1) = s[1];
    }
    return m;
  }();
  for (std::size_t j = 0; j < 2; ++j) {
    const Vector col = fused_draws.col(j);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= col.size();
    const double expect_var = 0.81 * (a.var(0, j) + b.var(0, j));
    EXPECT_NEAR(mean, 0.9 * (a.mean(0, j) + b.mean(0, j)), 4.0 * std::sqrt(expect_var / 20000));
    EXPECT_NEAR(var, expect_var, 0.05 * expect_var);
  }
  numerics::Rng rng(11);
  EXPECT_EQ(fuse_confounders(a, b, 0.9, 0.9, rng).rows(), 1u);
  EXPECT_THROW(FusedConfounder(a, random_posterior(2, 2, 1), 1, 0), ShapeError);
}

TEST(IvaeCheckpoint, RoundTrip) {
  testing::TempDir dir;
  auto model = small_model(small_config(), 6, 6, 3, 30);
  model.prior_mean.value[1] = 0.25;
  save_checkpoint(model, dir.path() / "m", {{"epoch", 4}, {"validation_elbo", -1.5}});
  auto loaded = load_checkpoint(dir.path() / "m");
  EXPECT_EQ(numerics::flatten_values(loaded.parameters()), numerics::flatten_values(model.parameters()));
  const Vector row{1, 0, 0, 1, 0, 1};
  EXPECT_EQ(loaded.encode(row, 1).mean, model.encode(row, 1).mean);
  const auto manifest = nlohmann::json::parse(testing::read_file(dir.path() / "m.json"));
  EXPECT_EQ(manifest.at("latent_dim"), 2);
  EXPECT_EQ(manifest.at("epoch"), 4);
  EXPECT_EQ(manifest.at("encoder_sizes"), (std::vector<int>{9, 5, 4}));
  // Truncated blob.
  std::filesystem::resize_file(dir.path() / "m.bin", 16);
  EXPECT_THROW(load_checkpoint(dir.path() / "m"), ValidationError);
  EXPECT_THROW(load_checkpoint(dir.path() / "missing"), IoError);
}

TEST(IvaeIdentifiability, AffineAlignmentHelper) {
  numerics::Rng rng(40);
  Matrix src(200, 2), dst(200, 2);
  for (std::size_t r = 0; r < 200; ++r) {
    src(r, 0) = rng.normal();
    src(r, 1) = rng.normal();
    dst(r, 0) = 2.0 * src(r, 0) - src(r, 1) + 3.0;
    dst(r, 1) = 0.5 * src(r, 1) - 1.0;
  }
  EXPECT_NEAR(eval::affine_alignment_r2(src, dst), 1.0, 1e-10);
  Matrix noise(200, 2);
  for (double& v : noise.data()) v = rng.normal();
  EXPECT_LT(eval::affine_alignment_r2(noise, dst), 0.2);
}

}  // namespace
}  // namespace ividr::ivae
