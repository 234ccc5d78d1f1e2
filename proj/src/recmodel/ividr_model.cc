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

#include "ividr/recmodel/ividr_model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "ividr/common/error.h"
#include "ividr/recmodel/loss.h"

namespace ividr::recmodel {
namespace {

constexpr std::uint64_t kMfInitStream = 0x21;
constexpr std::uint64_t kHeadInitStream = 0x22;
constexpr std::uint64_t kExampleStream = 0x23;
constexpr std::uint64_t kConfounderStream = 0x24;

struct VariantInfo {
  Variant variant;
  std::string_view name;
};

constexpr VariantInfo kVariants[] = {
    {Variant::kIViDR, "IViDR"}, {Variant::kIViDRT, "IViDR-T"}, {Variant::kIViDRF, "IViDR-F"},
    {Variant::kIViDRR, "IViDR-R"}, {Variant::kMF, "MF"},         {Variant::kIDCF, "iDCF-baseline"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& info : kVariants) {
    if (info.variant == v) return info.name;
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& info : kVariants) {
    if (lower(info.name) == key) return info.variant;
  }
  if (key == "idcf") return Variant::kIDCF;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected IViDR, IViDR-T, IViDR-F, IViDR-R, MF or iDCF-baseline)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::kIViDR, Variant::kIViDRT, Variant::kIViDRF,
                                      Variant::kIViDRR, Variant::kMF,     Variant::kIDCF};
  return v;
}

bool uses_iv_stage(Variant v) { return v != Variant::kMF && v != Variant::kIDCF; }
bool uses_confounder(Variant v) { return v != Variant::kMF; }

iv::Combination combination_for(Variant v) {
  switch (v) {
    case Variant::kIViDR:
      return iv::Combination::kLearned;
    case Variant::kIViDRT:
      return iv::Combination::kTreatment;
    case Variant::kIViDRF:
      return iv::Combination::kFittedOnly;
    case Variant::kIViDRR:
      return iv::Combination::kResidualOnly;
    default:
      throw ConfigError("variant " + std::string(variant_name(v)) + " has no IV stage");
  }
}

ConfounderHead::ConfounderHead(int n_items, int latent_dim, const HeadConfig& cfg, numerics::Rng& rng)
    : n_items_(n_items), latent_dim_(latent_dim), use_mlp_(cfg.mlp) {
  if (n_items < 1 || latent_dim < 1) throw ConfigError("confounder head: dimensions must be positive");
  embeddings = numerics::Parameter("head.item_embeddings", static_cast<std::size_t>(n_items * latent_dim));
  for (double& v : embeddings.value) v = 0.1 * rng.normal();
  if (use_mlp_) {
    if (cfg.hidden < 1) throw ConfigError("confounder head: hidden width must be positive");
    mlp = numerics::Mlp({static_cast<std::size_t>(2 * latent_dim), static_cast<std::size_t>(cfg.hidden), 1},
                        numerics::Activation::kIdentity, rng);
  }
}

std::span<const double> ConfounderHead::item_embedding(int i) const {
  return {embeddings.value.data() + static_cast<std::size_t>(i * latent_dim_), static_cast<std::size_t>(latent_dim_)};
}

Vector ConfounderHead::mlp_input(std::span<const double> c, int i) const {
  Vector in(c.begin(), c.end());
  const auto e = item_embedding(i);
  in.insert(in.end(), e.begin(), e.end());
  return in;
}

double ConfounderHead::score(std::span<const double> c, int i) const {
  if (c.size() != static_cast<std::size_t>(latent_dim_)) throw ShapeError("confounder head: latent length mismatch");
  if (!use_mlp_) return numerics::dot(c, item_embedding(i));
  return mlp.evaluate(mlp_input(c, i))[0];
}

void ConfounderHead::accumulate_grad(std::span<const double> c, int i, double g) {
  const auto d = static_cast<std::size_t>(latent_dim_);
  double* ge = embeddings.grad.data() + static_cast<std::size_t>(i) * d;
  if (!use_mlp_) {
    for (std::size_t k = 0; k < d; ++k) ge[k] += g * c[k];
    return;
  }
  mlp.forward(mlp_input(c, i));
  const Vector din = mlp.backward(Vector{g});
  for (std::size_t k = 0; k < d; ++k) ge[k] += din[d + k];
}

numerics::ParameterList ConfounderHead::parameters() {
  numerics::ParameterList out{&embeddings};
  if (use_mlp_) {
    for (auto* p : mlp.parameters()) out.push_back(p);
  }
  return out;
}

IviDrModel::IviDrModel(Variant variant, int n_users, int n_items, int dim, int latent_dim, double phi, double lambda,
                       const HeadConfig& head_cfg, numerics::Rng& mf_rng, numerics::Rng& head_rng)
    : mf(n_users, n_items, dim, 0.1, mf_rng),
      head(n_items, latent_dim, head_cfg, head_rng),
      variant_(variant),
      phi_(variant == Variant::kMF ? 0.0 : phi),
      lambda_(lambda) {
  if (!(phi >= 0.0) || !(lambda >= 0.0)) throw ConfigError("phi and lambda must be non-negative");
}

double IviDrModel::confounder_score(std::span<const double> c, int i) const { return head.score(c, i); }

double IviDrModel::logit(int u, int i, std::span<const double> c) const {
  const double conf = confounded() ? phi_ * head.score(c, i) : 0.0;
  return conf + lambda_ * mf.score(u, i);
}

double IviDrModel::predict(int u, int i, std::span<const double> c) const { return numerics::sigmoid(logit(u, i, c)); }

double IviDrModel::loss_and_grad(std::span<const Example> batch, const ivae::FusedConfounder* fused,
                                 numerics::Rng& sample_rng) {
  if (batch.empty()) return 0.0;
  if (confounded() && fused == nullptr) throw ConfigError("confounder path needs fused posteriors");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Vector c;
  for (const auto& ex : batch) {
    double l = lambda_ * mf.score(ex.user, ex.item);
    if (confounded()) {
      c = fused->sample(static_cast<std::size_t>(ex.user), sample_rng);
      l += phi_ * head.score(c, ex.item);
    }
    loss += scale * bce_with_logit(l, ex.label);
    const double g = scale * bce_with_logit_grad(l, ex.label);
    mf.accumulate_grad(ex.user, ex.item, lambda_ * g);
    if (confounded()) head.accumulate_grad(c, ex.item, phi_ * g);
  }
  return loss;
}

numerics::ParameterList IviDrModel::parameters() {
  numerics::ParameterList out = mf.parameters();
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

void RecTrainConfig::validate() const {
  if (dim < 1 || epochs < 1 || batch_size < 1 || negatives < 0 || k < 1) {
    throw ConfigError("recmodel: dim, epochs, batch_size, k must be positive and negatives >= 0");
  }
  if (learning_rates.empty() || weight_decays.empty()) throw ConfigError("recmodel: empty optimizer grid");
  if (!(phi >= 0.0) || !(lambda >= 0.0)) throw ConfigError("recmodel: phi and lambda must be non-negative");
}

nlohmann::ordered_json RecTrainConfig::to_json() const {
  return {{"dim", dim},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"negatives", negatives},
          {"learning_rates", learning_rates},
          {"weight_decays", weight_decays},
          {"phi", phi},
          {"lambda", lambda},
          {"head", head.mlp ? "mlp" : "linear"},
          {"head_hidden", head.hidden},
          {"k", k},
          {"seed", seed}};
}

eval::ScoreFn scorer(const IviDrModel& model, const ivae::FusedConfounder* fused) {
  if (fused == nullptr) {
    return [&model](int u, int i) { return model.logit(u, i, {}); };
  }
  return [&model, fused](int u, int i) { return model.logit(u, i, fused->mean().row(static_cast<std::size_t>(u))); };
}

namespace {

bool has_positive(std::span<const eval::UserItemLabel> v) {
  return std::any_of(v.begin(), v.end(), [](const auto& x) { return x.label > 0; });
}

}  // namespace

RecTrainResult train_cell(Variant variant, const ExampleSampler& sampler,
                          std::span<const eval::UserItemLabel> validation, const ivae::FusedConfounder* fused,
                          const RecTrainConfig& cfg, double learning_rate, double weight_decay) {
  cfg.validate();
  const int n_users = sampler.n_users();
  const int n_items = sampler.n_items();
  const int latent = fused != nullptr ? static_cast<int>(fused->dim()) : 1;
  if (fused != nullptr && fused->users() != static_cast<std::size_t>(n_users)) {
    throw ShapeError("fused posteriors must cover every user");
  }
  auto mf_rng = numerics::Rng::derive(cfg.seed, kMfInitStream);
  auto head_rng = numerics::Rng::derive(cfg.seed, kHeadInitStream);
  auto example_rng = numerics::Rng::derive(cfg.seed, kExampleStream);
  auto sample_rng = numerics::Rng::derive(cfg.seed, kConfounderStream);
  RecTrainResult res{IviDrModel(variant, n_users, n_items, cfg.dim, latent, cfg.phi, cfg.lambda, cfg.head, mf_rng,
                                head_rng),
                     {learning_rate, weight_decay, -std::numeric_limits<double>::infinity(), -1},
                     {}};
  auto& model = res.model;
  auto params = model.parameters();
  numerics::AdamConfig adam;
  adam.learning_rate = learning_rate;
  adam.weight_decay = weight_decay;
  numerics::Adam opt(params, adam);
  opt.zero_grad();
  const bool validate = has_positive(validation);
  std::vector<double> best;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto examples = sampler.epoch(example_rng);
    for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
      const std::size_t m = std::min(cfg.batch_size, examples.size() - start);
      const double l = model.loss_and_grad(std::span<const Example>(examples.data() + start, m), fused, sample_rng);
      if (!std::isfinite(l)) throw NumericError("recommender loss diverged at epoch " + std::to_string(epoch));
      opt.step();
    }
    if (!validate) {
      res.chosen.best_epoch = epoch;
      continue;
    }
    const double ndcg = eval::evaluate_rankings(validation, scorer(model, fused), cfg.k).ndcg;
    if (ndcg > res.chosen.validation_ndcg) {
      res.chosen.validation_ndcg = ndcg;
      res.chosen.best_epoch = epoch;
      best = numerics::flatten_values(params);
    }
  }
  if (!best.empty()) numerics::load_values(params, best);
  if (!validate) res.chosen.validation_ndcg = std::numeric_limits<double>::quiet_NaN();
  res.grid.push_back(res.chosen);
  return res;
}

RecTrainResult train_recmodel(Variant variant, const ExampleSampler& sampler,
                              std::span<const eval::UserItemLabel> validation, const ivae::FusedConfounder* fused,
                              const RecTrainConfig& cfg) {
  cfg.validate();
  std::optional<RecTrainResult> best;
  std::vector<GridCell> grid;
  for (double lr : cfg.learning_rates) {
    for (double wd : cfg.weight_decays) {
      auto cell = train_cell(variant, sampler, validation, fused, cfg, lr, wd);
      grid.push_back(cell.chosen);
      // Strict improvement keeps the first cell on ties (and on NaN scores).
      if (!best || cell.chosen.validation_ndcg > best->chosen.validation_ndcg) best = std::move(cell);
    }
  }
  best->grid = std::move(grid);
  return std::move(*best);
}

void save_model(const IviDrModel& model, const std::filesystem::path& prefix, const nlohmann::ordered_json& extra) {
  IviDrModel copy = model;
  const auto flat = numerics::flatten_values(copy.parameters());
  auto bin = prefix;
  bin += ".bin";
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw IoError("cannot write " + bin.string());
    out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  nlohmann::ordered_json j;
  j["variant"] = variant_name(model.variant());
  j["n_users"] = model.mf.n_users();
  j["n_items"] = model.mf.n_items();
  j["dim"] = model.mf.dim();
  j["latent_dim"] = model.head.latent_dim();
  j["phi"] = model.phi();
  j["lambda"] = model.lambda();
  j["parameter_count"] = flat.size();
  for (const auto& [k, v] : extra.items()) j[k] = v;
  auto manifest = prefix;
  manifest += ".json";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << j.dump(2) << '\n';
}

}  // namespace ividr::recmodel
