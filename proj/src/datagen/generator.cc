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

#include "ividr/datagen/generator.h"

#include <algorithm>
#include <cmath>

#include "ividr/common/error.h"
#include "ividr/datasets/bundle.h"
#include "ividr/datasets/preprocess.h"
#include "ividr/numerics/mlp.h"

namespace ividr::datagen {
namespace {

// Stream tags for Rng::derive.
constexpr std::uint64_t kUserStream = 1;
constexpr std::uint64_t kItemStream = 2;
constexpr std::uint64_t kExposureStream = 3;
constexpr std::uint64_t kRatingStream = 4;
constexpr std::uint64_t kUserEmbeddingStream = 5;
constexpr std::uint64_t kItemEmbeddingStream = 6;
constexpr std::uint64_t kFeatureStream = 7;
constexpr std::uint64_t kUnbiasedStream = 8;
constexpr std::uint64_t kMixStream = 9;

MixtureDraw sample_mixture(int n, const GenConfig& cfg, std::uint64_t base) {
  const auto probs = proxy_probabilities(cfg.n_mixture_components, cfg.proxy_sd);
  const Matrix means = component_means(cfg.n_mixture_components, cfg.confounder_dim);
  MixtureDraw out{Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(cfg.confounder_dim)), {}};
  out.labels.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    auto rng = numerics::Rng::derive(base, static_cast<std::uint64_t>(r));
    const auto w = rng.categorical(probs);
    out.labels[static_cast<std::size_t>(r)] = static_cast<int>(w);
    for (int d = 0; d < cfg.confounder_dim; ++d) {
      out.values(static_cast<std::size_t>(r), static_cast<std::size_t>(d)) =
          means(w, static_cast<std::size_t>(d)) + cfg.component_sd * rng.normal();
    }
  }
  return out;
}

std::uint64_t stream_base(std::uint64_t seed, std::uint64_t tag) {
  return numerics::Rng::derive(seed, tag).next_u64();
}

Matrix normal_rows(int rows, int cols, std::uint64_t base) {
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r) {
    auto rng = numerics::Rng::derive(base, static_cast<std::uint64_t>(r));
    for (double& v : m.row(static_cast<std::size_t>(r))) v = rng.normal();
  }
  return m;
}

}  // namespace

void GenConfig::validate() const {
  if (n_users < 1 || n_items < 1) throw ConfigError("n_users and n_items must be positive");
  if (confounder_dim < 1) throw ConfigError("confounder_dim must be positive");
  if (n_mixture_components < 1) throw ConfigError("n_mixture_components must be at least 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(beta)) throw ConfigError("gamma must be >= 0 and beta finite");
  if (rating_levels < 2) throw ConfigError("rating_levels must be at least 2");
  if (!(component_sd >= 0.0) || !(proxy_sd > 0.0)) throw ConfigError("standard deviations must be non-negative");
  if (preference_dim < 1 || feature_dim < 0) throw ConfigError("embedding dimensions must be positive");
  if (!(rating_noise_sd >= 0.0)) throw ConfigError("rating noise must be non-negative");
  if (unbiased_per_user < 0 || unbiased_per_user > n_items) {
    throw ConfigError("unbiased_per_user must lie in [0, n_items]");
  }
}

nlohmann::ordered_json GenConfig::to_json() const {
  return {{"n_users", n_users},
          {"n_items", n_items},
          {"confounder_dim", confounder_dim},
          {"n_mixture_components", n_mixture_components},
          {"alpha", alpha},
          {"beta", beta},
          {"gamma", gamma},
          {"rating_levels", rating_levels},
          {"component_sd", component_sd},
          {"proxy_sd", proxy_sd},
          {"preference_dim", preference_dim},
          {"rating_noise_sd", rating_noise_sd},
          {"feature_dim", feature_dim},
          {"unbiased_per_user", unbiased_per_user},
          {"seed", seed}};
}

GenConfig preset(const std::string& name) {
  GenConfig cfg;
  if (name == "paper") return cfg;
  if (name == "desk") {
    cfg.n_users = 2000;
    cfg.n_items = 300;
    return cfg;
  }
  if (name == "coat") {
    cfg.n_users = 290;
    cfg.n_items = 300;
    cfg.alpha = 0.12;
    cfg.unbiased_per_user = 16;
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "' (expected paper, desk or coat)");
}

Matrix component_means(int n_components, int dim) {
  Matrix m(static_cast<std::size_t>(n_components), static_cast<std::size_t>(dim));
  const double centre = (n_components - 1) / 2.0;
  for (int w = 0; w < n_components; ++w) {
    for (int d = 0; d < dim; ++d) {
      const int k = (w * (d + 1)) % n_components;
      m(static_cast<std::size_t>(w), static_cast<std::size_t>(d)) = k - centre;
    }
  }
  return m;
}

std::vector<double> proxy_probabilities(int n_components, double sd) {
  const double centre = (n_components - 1) / 2.0;
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - centre) / (sd * std::sqrt(2.0))); };
  std::vector<double> p(static_cast<std::size_t>(n_components));
  double total = 0.0;
  for (int k = 0; k < n_components; ++k) {
    p[static_cast<std::size_t>(k)] = cdf(k + 0.5) - cdf(k - 0.5);
    total += p[static_cast<std::size_t>(k)];
  }
  for (double& v : p) v /= total;
  return p;
}

MixtureDraw sample_user_confounders(const GenConfig& cfg, numerics::Rng& rng) {
  cfg.validate();
  return sample_mixture(cfg.n_users, cfg, rng.next_u64());
}

MixtureDraw sample_item_factors(const GenConfig& cfg, numerics::Rng& rng) {
  cfg.validate();
  return sample_mixture(cfg.n_items, cfg, rng.next_u64());
}

double exposure_probability(std::span<const double> h, const Matrix& mix, std::span<const double> e_h,
                            double alpha, double gamma, double eps) {
  double logit = 0.0;
  for (std::size_t a = 0; a < h.size(); ++a) {
    for (std::size_t b = 0; b < e_h.size(); ++b) logit += h[a] * mix(a, b) * e_h[b];
  }
  return alpha * numerics::sigmoid(numerics::activate(numerics::Activation::kLeakyRelu, logit) + gamma * eps);
}

Matrix gen_exposure(const Matrix& h, const Matrix& e_h, const Matrix& mix, double alpha, double gamma,
                    numerics::Rng& rng) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (h.cols() != mix.rows() || e_h.cols() != mix.cols()) throw ShapeError("gen_exposure: shape mismatch");
  const std::uint64_t base = rng.next_u64();
  // Precompute mix · e_h,i once per item.
  const Matrix projected = matmul(e_h, mix.transpose());
  Matrix a(h.rows(), e_h.rows());
  for (std::size_t u = 0; u < h.rows(); ++u) {
    auto r = numerics::Rng::derive(base, u);
    const auto hu = h.row(u);
    for (std::size_t i = 0; i < e_h.rows(); ++i) {
      const double logit = numerics::dot(hu, projected.row(i));
      const double eps = r.normal();
      const double p =
          alpha * numerics::sigmoid(numerics::activate(numerics::Activation::kLeakyRelu, logit) + gamma * eps);
      a(u, i) = r.uniform() < p ? 1.0 : 0.0;
    }
  }
  return a;
}

int RatingTable::level(std::size_t u, std::size_t i) const {
  const double s = raw(u, i);
  return 1 + static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), s) - thresholds.begin());
}

RatingTable gen_ratings(const Matrix& e_u, const Matrix& e_i, const Matrix& h, const Matrix& e_h, double beta,
                        double noise_sd, int levels, numerics::Rng& rng) {
  if (e_u.cols() != e_i.cols() || h.cols() != e_h.cols() || e_u.rows() != h.rows() || e_i.rows() != e_h.rows()) {
    throw ShapeError("gen_ratings: shape mismatch");
  }
  if (levels < 2) throw ConfigError("rating levels must be at least 2");
  const std::uint64_t base = rng.next_u64();
  RatingTable t;
  t.raw = Matrix(e_u.rows(), e_i.rows());
  for (std::size_t u = 0; u < e_u.rows(); ++u) {
    auto r = numerics::Rng::derive(base, u);
    for (std::size_t i = 0; i < e_i.rows(); ++i) {
      t.raw(u, i) = numerics::dot(e_u.row(u), e_i.row(i)) + beta * numerics::dot(h.row(u), e_h.row(i)) +
                    noise_sd * r.normal();
    }
  }
  std::vector<double> sorted = t.raw.data();
  std::sort(sorted.begin(), sorted.end());
  for (int k = 1; k < levels; ++k) {
    // Level k+1 starts at rank ⌈k n / levels⌉ of the sorted scores.
    const std::size_t idx = (static_cast<std::size_t>(k) * sorted.size() + levels - 1) / static_cast<std::size_t>(levels);
    t.thresholds.push_back(sorted[std::min(idx, sorted.size() - 1)]);
  }
  return t;
}

SyntheticDataset generate(const GenConfig& cfg) {
  cfg.validate();
  numerics::Rng users_rng = numerics::Rng::derive(cfg.seed, kUserStream);
  numerics::Rng items_rng = numerics::Rng::derive(cfg.seed, kItemStream);
  SyntheticDataset out;
  auto c = sample_user_confounders(cfg, users_rng);
  auto v = sample_item_factors(cfg, items_rng);

  auto mix_rng = numerics::Rng::derive(cfg.seed, kMixStream);
  Matrix mix(static_cast<std::size_t>(cfg.confounder_dim), static_cast<std::size_t>(cfg.confounder_dim));
  for (double& x : mix.data()) x = mix_rng.normal();

  const Matrix e_u = normal_rows(cfg.n_users, cfg.preference_dim, stream_base(cfg.seed, kUserEmbeddingStream));
  const Matrix e_i = normal_rows(cfg.n_items, cfg.preference_dim, stream_base(cfg.seed, kItemEmbeddingStream));
  const Matrix z = normal_rows(cfg.n_users, cfg.feature_dim, stream_base(cfg.seed, kFeatureStream));

  // H = C on the user side; the item side enters through e_H = V.
  auto exposure_rng = numerics::Rng::derive(cfg.seed, kExposureStream);
  out.exposure = gen_exposure(c.values, v.values, mix, cfg.alpha, cfg.gamma, exposure_rng);
  auto rating_rng = numerics::Rng::derive(cfg.seed, kRatingStream);
  const auto ratings = gen_ratings(e_u, e_i, c.values, v.values, cfg.beta, cfg.rating_noise_sd,
                                   cfg.rating_levels, rating_rng);

  auto& ds = out.data;
  ds.n_users = cfg.n_users;
  ds.n_items = cfg.n_items;
  ds.user_ids = datasets::IdMap::dense(static_cast<std::size_t>(cfg.n_users));
  ds.item_ids = datasets::IdMap::dense(static_cast<std::size_t>(cfg.n_items));
  const std::uint64_t unbiased_base = stream_base(cfg.seed, kUnbiasedStream);
  for (std::size_t u = 0; u < static_cast<std::size_t>(cfg.n_users); ++u) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.n_items); ++i) {
      if (out.exposure(u, i) != 0.0) {
        ds.triples.push_back({static_cast<int>(u), static_cast<int>(i), ratings.level(u, i),
                              datasets::SplitTag::kBiased});
      }
    }
    auto r = numerics::Rng::derive(unbiased_base, u);
    for (auto i : r.sample_without_replacement(static_cast<std::size_t>(cfg.n_items),
                                               static_cast<std::size_t>(cfg.unbiased_per_user))) {
      ds.triples.push_back({static_cast<int>(u), static_cast<int>(i), ratings.level(u, i),
                            datasets::SplitTag::kUnbiased});
    }
  }
  ds.proxy = c.labels;
  ds.n_proxy_categories = cfg.n_mixture_components;
  ds.user_features = z;

  out.truth.c = std::move(c.values);
  out.truth.v = std::move(v.values);
  out.truth.item_proxy = std::move(v.labels);
  out.truth.user_embedding = e_u;
  out.truth.item_embedding = e_i;
  out.truth.mix = mix;
  return out;
}

void write_synthetic_bundle(const std::filesystem::path& dir, const SyntheticDataset& ds, const GenConfig& cfg,
                            const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json meta;
  meta["source"] = "synthetic";
  meta["seed"] = cfg.seed;
  meta["config"] = cfg.to_json();
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  datasets::write_bundle(dir, ds.data, ds.exposure, &ds.truth.c, meta);
}

}  // namespace ividr::datagen
