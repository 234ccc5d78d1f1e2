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

#include "ividr/iv/reconstruction.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "ividr/common/error.h"
#include "ividr/eval/stats.h"
#include "ividr/recmodel/loss.h"
#include "ividr/recmodel/mf.h"

namespace ividr::iv {
namespace {

constexpr std::uint64_t kSubsampleStream = 0x1f;
constexpr std::uint64_t kProjectionStream = 0x2f;
constexpr std::uint64_t kNetworkStream = 0x3f;
constexpr std::uint64_t kWarmStartStream = 0x4f;
constexpr std::uint64_t kTrainStream = 0x5f;

std::uint64_t hash_users(const std::vector<int>& users) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int u : users) {
    std::uint64_t s = h ^ static_cast<std::uint64_t>(u);
    h = numerics::splitmix64(s);
  }
  return h;
}

}  // namespace

const char* combination_name(Combination c) {
  switch (c) {
    case Combination::kLearned:
      return "learned";
    case Combination::kTreatment:
      return "treatment";
    case Combination::kFittedOnly:
      return "fitted";
    case Combination::kResidualOnly:
      return "residual";
  }
  return "?";
}

void IvConfig::validate() const {
  if (embedding_dim < 1 || hidden < 0) throw ConfigError("iv: embedding_dim must be positive");
  if (n_max < 1) throw ConfigError("iv: n_max must be positive");
  if (!std::isfinite(scale)) throw ConfigError("iv: scale must be finite");
  if (!(pinv_tolerance >= 0.0)) throw ConfigError("iv: pinv tolerance must be >= 0");
  if (warm_start_epochs < 0 || epochs < 0) throw ConfigError("iv: epoch counts must be >= 0");
  if (batch_size < 1) throw ConfigError("iv: batch size must be positive");
  if (negatives < 0) throw ConfigError("iv: negatives must be >= 0");
}

nlohmann::ordered_json IvConfig::to_json() const {
  return {{"embedding_dim", embedding_dim},
          {"hidden", hidden},
          {"n_max", n_max},
          {"scale", scale},
          {"pinv_tolerance", pinv_tolerance},
          {"warm_start_epochs", warm_start_epochs},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", adam.learning_rate},
          {"weight_decay", adam.weight_decay},
          {"negatives", negatives},
          {"seed", seed}};
}

Treatment build_treatment(const std::vector<std::vector<int>>& train_items_by_user, const Matrix& item_embeddings,
                          int u, int i) {
  if (u < 0 || static_cast<std::size_t>(u) >= train_items_by_user.size()) throw DomainError("user id out of range");
  if (i < 0 || static_cast<std::size_t>(i) >= item_embeddings.rows()) throw DomainError("item id out of range");
  Treatment t;
  t.items = train_items_by_user[static_cast<std::size_t>(u)];
  t.items.push_back(i);
  std::sort(t.items.begin(), t.items.end());
  t.items.erase(std::unique(t.items.begin(), t.items.end()), t.items.end());
  t.embeddings = Matrix(t.items.size(), item_embeddings.cols());
  for (std::size_t k = 0; k < t.items.size(); ++k) {
    const auto src = item_embeddings.row(static_cast<std::size_t>(t.items[k]));
    std::copy(src.begin(), src.end(), t.embeddings.row(k).begin());
  }
  return t;
}

std::optional<IvMatrix> build_iv_matrix(const std::vector<std::vector<int>>& users_by_item,
                                        const Matrix& user_feature_embeddings, int j, int n_max, std::uint64_t seed) {
  if (j < 0 || static_cast<std::size_t>(j) >= users_by_item.size()) throw DomainError("item id out of range");
  if (n_max < 1) throw ConfigError("n_max must be positive");
  std::vector<int> users = users_by_item[static_cast<std::size_t>(j)];
  if (users.empty()) return std::nullopt;
  std::sort(users.begin(), users.end());
  if (users.size() > static_cast<std::size_t>(n_max)) {
    auto rng = numerics::Rng::derive(seed, kSubsampleStream, hash_users(users));
    std::vector<int> kept;
    for (auto k : rng.sample_without_replacement(users.size(), static_cast<std::size_t>(n_max))) {
      kept.push_back(users[k]);
    }
    users = std::move(kept);
  }
  IvMatrix out{Matrix(user_feature_embeddings.cols(), users.size()), users};
  for (std::size_t c = 0; c < users.size(); ++c) {
    const auto e = user_feature_embeddings.row(static_cast<std::size_t>(users[c]));
    for (std::size_t r = 0; r < e.size(); ++r) out.z(r, c) = e[r];
  }
  return out;
}

Vector pool_columns(const Matrix& z) {
  Vector p(z.rows(), 0.0);
  if (z.cols() == 0) return p;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double s = 0.0;
    for (double v : z.row(r)) s += v;
    p[r] = s / static_cast<double>(z.cols());
  }
  return p;
}

Matrix feature_embedding(const Matrix& features, int d_q, std::uint64_t seed) {
  if (features.cols() == 0) throw ConfigError("the IV stage needs user features");
  auto rng = numerics::Rng::derive(seed, kProjectionStream);
  Matrix proj(features.cols(), static_cast<std::size_t>(d_q));
  const double s = 1.0 / std::sqrt(static_cast<double>(features.cols()));
  for (double& v : proj.data()) v = s * rng.normal();
  return matmul(features, proj);
}

Decomposition decompose(std::span<const double> t_j, const Matrix& z_j, const Mlp& mlp0, double tol) {
  Decomposition d;
  d.transformed = mlp0.evaluate(t_j);
  if (z_j.rows() != d.transformed.size()) throw ShapeError("decompose: Z_j rows differ from MLP_0 output size");
  const Vector tau = numerics::least_squares(z_j, d.transformed, tol);
  d.fitted = numerics::matvec(z_j, tau);
  d.residual.resize(d.transformed.size());
  for (std::size_t k = 0; k < d.residual.size(); ++k) d.residual[k] = d.transformed[k] - d.fitted[k];
  return d;
}

Combined combine(const Decomposition& d, std::span<const double> pool, const Mlp& mlp1, const Mlp& mlp2,
                 Combination mode) {
  Combined c;
  switch (mode) {
    case Combination::kLearned: {
      Vector in(d.transformed);
      in.insert(in.end(), pool.begin(), pool.end());
      c.alpha1 = mlp1.evaluate(in).at(0);
      c.alpha2 = mlp2.evaluate(in).at(0);
      break;
    }
    case Combination::kTreatment:
      c.alpha1 = c.alpha2 = 1.0;
      break;
    case Combination::kFittedOnly:
      c.alpha1 = 1.0;
      break;
    case Combination::kResidualOnly:
      c.alpha2 = 1.0;
      break;
  }
  c.t_re.resize(d.fitted.size());
  if (mode == Combination::kTreatment) {
    c.t_re = d.transformed;
  } else {
    for (std::size_t k = 0; k < c.t_re.size(); ++k) c.t_re[k] = c.alpha1 * d.fitted[k] + c.alpha2 * d.residual[k];
  }
  return c;
}

Matrix debias_interactions(const Matrix& x, std::span<const double> item_adjustment, double scale) {
  if (item_adjustment.size() != x.cols()) throw ShapeError("debias_interactions: one adjustment per item expected");
  Matrix out = x;
  for (std::size_t u = 0; u < x.rows(); ++u) {
    auto row = out.row(u);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) row[j] += scale * item_adjustment[j];
    }
  }
  return out;
}

Reconstructor::Reconstructor(int n_users, const Matrix& item_embeddings, const Matrix& user_feature_embeddings,
                             const std::vector<std::vector<int>>& users_by_item, const IvConfig& cfg,
                             Combination mode, numerics::Rng& rng)
    : n_users_(n_users), dim_(cfg.embedding_dim), cfg_(cfg), mode_(mode) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(dim_);
  if (user_feature_embeddings.cols() != d) throw ShapeError("feature embeddings must have d_q columns");
  if (users_by_item.size() != item_embeddings.rows()) throw ShapeError("users_by_item must cover every item");
  std::vector<std::size_t> mlp0_sizes{item_embeddings.cols()};
  std::vector<std::size_t> mix_sizes{2 * d};
  if (cfg.hidden > 0) {
    mlp0_sizes.push_back(static_cast<std::size_t>(cfg.hidden));
    mix_sizes.push_back(static_cast<std::size_t>(cfg.hidden));
  }
  mlp0_sizes.push_back(d);
  mix_sizes.push_back(1);
  mlp0 = Mlp(mlp0_sizes, numerics::Activation::kIdentity, rng);
  mlp1 = Mlp(mix_sizes, numerics::Activation::kIdentity, rng);
  mlp2 = Mlp(mix_sizes, numerics::Activation::kIdentity, rng);
  // Start the combination weights near one so T^re begins close to MLP_0(T).
  mlp1.bias(mlp1.num_layers() - 1).value[0] = 1.0;
  mlp2.bias(mlp2.num_layers() - 1).value[0] = 1.0;
  head = numerics::Parameter("iv.head", d);
  for (double& v : head.value) v = 0.1 * rng.normal();
  user_factors = numerics::Parameter("iv.user_factors", static_cast<std::size_t>(n_users) * d);
  for (double& v : user_factors.value) v = 0.1 * rng.normal();
  user_bias = numerics::Parameter("iv.user_bias", static_cast<std::size_t>(n_users));
  item_bias = numerics::Parameter("iv.item_bias", item_embeddings.rows());
  global_bias = numerics::Parameter("iv.global_bias", 1);

  items_.resize(item_embeddings.rows());
  for (std::size_t j = 0; j < items_.size(); ++j) {
    auto& it = items_[j];
    it.treatment.assign(item_embeddings.row(j).begin(), item_embeddings.row(j).end());
    auto z = build_iv_matrix(users_by_item, user_feature_embeddings, static_cast<int>(j), cfg.n_max, cfg.seed);
    if (z) {
      it.has_iv = true;
      it.n_users = static_cast<int>(z->users.size());
      it.projector = numerics::column_space_projector(z->z, cfg.pinv_tolerance);
      it.pool = pool_columns(z->z);
    } else {
      it.projector = Matrix(d, d);
      it.pool = Vector(d, 0.0);
    }
  }
}

Vector Reconstructor::mlp_input(const Vector& transformed, const Vector& pool) const {
  Vector in(transformed);
  in.insert(in.end(), pool.begin(), pool.end());
  return in;
}

Decomposition Reconstructor::decomposition(int j) const {
  const auto& it = items_.at(static_cast<std::size_t>(j));
  Decomposition d;
  d.transformed = mlp0.evaluate(it.treatment);
  d.fitted = numerics::matvec(it.projector, d.transformed);
  d.residual.resize(d.transformed.size());
  for (std::size_t k = 0; k < d.residual.size(); ++k) d.residual[k] = d.transformed[k] - d.fitted[k];
  return d;
}

Combined Reconstructor::reconstruct(int j) const {
  return combine(decomposition(j), items_.at(static_cast<std::size_t>(j)).pool, mlp1, mlp2, mode_);
}

double Reconstructor::item_adjustment(int j) const { return numerics::dot(head.value, reconstruct(j).t_re); }

double Reconstructor::score(int u, int i) const {
  const auto t = reconstruct(i).t_re;
  const std::size_t d = static_cast<std::size_t>(dim_);
  std::span<const double> p(user_factors.value.data() + static_cast<std::size_t>(u) * d, d);
  return numerics::dot(p, t) + cfg_.scale * numerics::dot(head.value, t) + user_bias.value[static_cast<std::size_t>(u)] +
         item_bias.value[static_cast<std::size_t>(i)] + global_bias.value[0];
}

double Reconstructor::loss_and_grad(std::span<const recmodel::Example> batch) {
  if (batch.empty()) return 0.0;
  const std::size_t d = static_cast<std::size_t>(dim_);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // Forward once per distinct item in the batch.
  std::vector<int> slot(items_.size(), -1);
  std::vector<int> order;
  std::vector<Decomposition> decs;
  std::vector<Combined> combs;
  for (const auto& ex : batch) {
    auto& s = slot[static_cast<std::size_t>(ex.item)];
    if (s >= 0) continue;
    s = static_cast<int>(order.size());
    order.push_back(ex.item);
    decs.push_back(decomposition(ex.item));
    combs.push_back(combine(decs.back(), items_[static_cast<std::size_t>(ex.item)].pool, mlp1, mlp2, mode_));
  }
  std::vector<Vector> upstream(order.size(), Vector(d, 0.0));

  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto k = static_cast<std::size_t>(slot[static_cast<std::size_t>(ex.item)]);
    const auto& t = combs[k].t_re;
    const std::size_t uo = static_cast<std::size_t>(ex.user) * d;
    double s = user_bias.value[static_cast<std::size_t>(ex.user)] + item_bias.value[static_cast<std::size_t>(ex.item)] +
               global_bias.value[0];
    for (std::size_t q = 0; q < d; ++q) s += (user_factors.value[uo + q] + cfg_.scale * head.value[q]) * t[q];
    loss += inv_b * recmodel::bce_with_logit(s, ex.label);
    const double g = inv_b * recmodel::bce_with_logit_grad(s, ex.label);
    for (std::size_t q = 0; q < d; ++q) {
      upstream[k][q] += g * (user_factors.value[uo + q] + cfg_.scale * head.value[q]);
      user_factors.grad[uo + q] += g * t[q];
      head.grad[q] += g * cfg_.scale * t[q];
    }
    user_bias.grad[static_cast<std::size_t>(ex.user)] += g;
    item_bias.grad[static_cast<std::size_t>(ex.item)] += g;
    global_bias.grad[0] += g;
  }

  // Backward through the combination and MLP_0, once per item.
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& it = items_[static_cast<std::size_t>(order[k])];
    const auto& G = upstream[k];
    const auto& dec = decs[k];
    Vector dm(d, 0.0);
    if (mode_ == Combination::kTreatment) {
      dm = G;
    } else {
      const double a1 = combs[k].alpha1, a2 = combs[k].alpha2;
      // fitted = P m with P symmetric, residual = m − P m.
      const Vector pg = numerics::matvec(it.projector, G);
      for (std::size_t q = 0; q < d; ++q) dm[q] = a1 * pg[q] + a2 * (G[q] - pg[q]);
      if (mode_ == Combination::kLearned) {
        const Vector in = mlp_input(dec.transformed, it.pool);
        const double da1 = numerics::dot(G, dec.fitted);
        const double da2 = numerics::dot(G, dec.residual);
        mlp1.forward(in);
        const Vector g1 = mlp1.backward(std::span<const double>(&da1, 1));
        mlp2.forward(in);
        const Vector g2 = mlp2.backward(std::span<const double>(&da2, 1));
        for (std::size_t q = 0; q < d; ++q) dm[q] += g1[q] + g2[q];
      }
    }
    mlp0.forward(it.treatment);
    mlp0.backward(dm, false);
  }
  return loss;
}

numerics::ParameterList Reconstructor::parameters() {
  numerics::ParameterList out = mlp0.parameters();
  if (mode_ == Combination::kLearned) {
    for (auto* p : mlp1.parameters()) out.push_back(p);
    for (auto* p : mlp2.parameters()) out.push_back(p);
  }
  for (auto* p : {&head, &user_factors, &user_bias, &item_bias, &global_bias}) out.push_back(p);
  return out;
}

std::vector<double> Reconstructor::train(const recmodel::ExampleSampler& sampler, numerics::Rng& rng) {
  numerics::Adam opt(parameters(), cfg_.adam);
  opt.zero_grad();
  std::vector<double> history;
  for (int e = 0; e < cfg_.epochs; ++e) {
    const auto examples = sampler.epoch(rng);
    double total = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += cfg_.batch_size) {
      const std::size_t n = std::min(cfg_.batch_size, examples.size() - start);
      const double l = loss_and_grad(std::span<const recmodel::Example>(examples.data() + start, n));
      if (!std::isfinite(l)) throw NumericError("IV reconstruction loss diverged");
      total += l * static_cast<double>(n);
      opt.step();
    }
    history.push_back(examples.empty() ? 0.0 : total / static_cast<double>(examples.size()));
  }
  return history;
}

IvResult run_iv_stage(const Matrix& x, const recmodel::ExampleSampler& sampler, const Matrix& user_features,
                      const IvConfig& cfg, Combination mode) {
  cfg.validate();
  const int n_users = static_cast<int>(x.rows());
  const int n_items = static_cast<int>(x.cols());
  if (user_features.rows() != x.rows()) throw ShapeError("user features must have one row per user");

  auto warm_rng = numerics::Rng::derive(cfg.seed, kWarmStartStream);
  const auto mf = recmodel::fit_mf(sampler, n_users, n_items, cfg.embedding_dim, cfg.warm_start_epochs, cfg.adam,
                                   cfg.batch_size, warm_rng);
  Matrix t(static_cast<std::size_t>(n_items), static_cast<std::size_t>(cfg.embedding_dim));
  for (int i = 0; i < n_items; ++i) {
    const auto q = mf.item_factor(i);
    std::copy(q.begin(), q.end(), t.row(static_cast<std::size_t>(i)).begin());
  }
  const Matrix e = feature_embedding(user_features, cfg.embedding_dim, cfg.seed);

  std::vector<std::vector<int>> users_by_item(static_cast<std::size_t>(n_items));
  for (std::size_t u = 0; u < x.rows(); ++u) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (x(u, j) != 0.0) users_by_item[j].push_back(static_cast<int>(u));
    }
  }
  auto net_rng = numerics::Rng::derive(cfg.seed, kNetworkStream);
  Reconstructor rec(n_users, t, e, users_by_item, cfg, mode, net_rng);
  auto train_rng = numerics::Rng::derive(cfg.seed, kTrainStream);

  IvResult out;
  out.mode = mode;
  out.loss_history = rec.train(sampler, train_rng);
  out.adjustment.resize(static_cast<std::size_t>(n_items));
  for (int j = 0; j < n_items; ++j) {
    const auto dec = rec.decomposition(j);
    const auto c = rec.reconstruct(j);
    const double adj = numerics::dot(rec.head.value, c.t_re);
    out.adjustment[static_cast<std::size_t>(j)] = adj;
    out.items.push_back({j, !rec.has_iv(j), rec.iv_users(j), numerics::norm2(dec.fitted),
                         numerics::norm2(dec.residual), c.alpha1, c.alpha2, adj});
  }
  out.x_re = debias_interactions(x, out.adjustment, cfg.scale);
  return out;
}

void write_x_re(const std::filesystem::path& path, const Matrix& x_re) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  static_assert(std::endian::native == std::endian::little, "x_re.bin is little-endian");
  out.write(reinterpret_cast<const char*>(x_re.data().data()),
            static_cast<std::streamsize>(x_re.size() * sizeof(double)));
  if (!out) throw IoError("write failed for " + path.string());
}

Matrix read_x_re(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data().data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(m.size() * sizeof(double)) || in.peek() != EOF) {
    throw ValidationError("x_re.bin size does not match " + std::to_string(rows) + " x " + std::to_string(cols));
  }
  return m;
}

void write_iv_report(const std::filesystem::path& path, const IvResult& result, const IvConfig& cfg) {
  nlohmann::ordered_json j;
  j["combination"] = combination_name(result.mode);
  j["config"] = cfg.to_json();
  j["loss_history"] = result.loss_history;
  std::vector<double> a1, a2, res;
  std::size_t excluded = 0;
  auto items = nlohmann::ordered_json::array();
  for (const auto& it : result.items) {
    excluded += it.excluded;
    if (!it.excluded) {
      a1.push_back(it.alpha1);
      a2.push_back(it.alpha2);
      res.push_back(it.residual_norm);
    }
    items.push_back({{"item", it.item},
                     {"excluded", it.excluded},
                     {"n_users", it.n_users},
                     {"fitted_norm", it.fitted_norm},
                     {"residual_norm", it.residual_norm},
                     {"alpha1", it.alpha1},
                     {"alpha2", it.alpha2},
                     {"adjustment", it.adjustment}});
  }
  auto stat = [](const std::vector<double>& v) -> nlohmann::ordered_json {
    if (v.empty()) return nullptr;
    return {{"mean", eval::mean(v)}, {"std", v.size() > 1 ? eval::sample_std(v) : 0.0}};
  };
  j["excluded_items"] = excluded;
  j["alpha1"] = stat(a1);
  j["alpha2"] = stat(a2);
  j["residual_norm"] = stat(res);
  j["items"] = std::move(items);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ividr::iv
