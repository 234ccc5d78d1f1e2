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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>

#include "ividr/common/error.h"
#include "ividr/numerics/gaussian.h"
#include "ividr/numerics/linalg.h"

namespace ividr::ivae {
namespace {

constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kHoldoutStream = 0x12;
constexpr std::uint64_t kTrainStream = 0x13;
constexpr std::uint64_t kValidationStream = 0x14;

void require_finite(const Vector& encoder_out) {
  if (!std::all_of(encoder_out.begin(), encoder_out.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError("iVAE encoder produced a non-finite output");
  }
}

const char* likelihood_name(Likelihood l) { return l == Likelihood::kBernoulli ? "bernoulli" : "gaussian"; }

}  // namespace

void IvaeConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("ivae: latent_dim must be positive");
  if (encoder_hidden < 0 || decoder_hidden < 0) throw ConfigError("ivae: hidden widths must be >= 0");
  if (!(gaussian_variance > 0.0)) throw ConfigError("ivae: gaussian_variance must be positive");
  if (batch_size < 1) throw ConfigError("ivae: batch_size must be positive");
  if (max_epochs < 0 || patience < 1) throw ConfigError("ivae: max_epochs >= 0 and patience >= 1 required");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw ConfigError("ivae: holdout_fraction in [0, 1)");
  if (!(logvar_min < logvar_max)) throw ConfigError("ivae: logvar_min must be below logvar_max");
}

nlohmann::ordered_json IvaeConfig::to_json() const {
  return {{"latent_dim", latent_dim},
          {"encoder_hidden", encoder_hidden},
          {"decoder_hidden", decoder_hidden},
          {"likelihood", likelihood_name(likelihood)},
          {"gaussian_variance", gaussian_variance},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"holdout_fraction", holdout_fraction},
          {"learning_rate", adam.learning_rate},
          {"weight_decay", adam.weight_decay},
          {"logvar_min", logvar_min},
          {"logvar_max", logvar_max},
          {"seed", seed}};
}

IvaeModel::IvaeModel(int n_inputs, int n_outputs, int n_categories, const IvaeConfig& cfg, numerics::Rng& rng)
    : n_inputs_(n_inputs), n_outputs_(n_outputs), n_categories_(n_categories), latent_dim_(cfg.latent_dim), cfg_(cfg) {
  cfg.validate();
  if (n_inputs < 1 || n_outputs < 1 || n_categories < 1) throw ConfigError("ivae: dimensions must be positive");
  const auto d = static_cast<std::size_t>(latent_dim_);
  std::vector<std::size_t> enc{static_cast<std::size_t>(n_inputs + n_categories)};
  if (cfg.encoder_hidden > 0) enc.push_back(static_cast<std::size_t>(cfg.encoder_hidden));
  enc.push_back(2 * d);
  std::vector<std::size_t> dec{d};
  if (cfg.decoder_hidden > 0) dec.push_back(static_cast<std::size_t>(cfg.decoder_hidden));
  dec.push_back(static_cast<std::size_t>(n_outputs));
  encoder = Mlp(enc, numerics::Activation::kIdentity, rng);
  decoder = Mlp(dec, numerics::Activation::kIdentity, rng);
  prior_mean = numerics::Parameter("ivae.prior_mean", static_cast<std::size_t>(n_categories) * d);
  prior_logvar = numerics::Parameter("ivae.prior_logvar", static_cast<std::size_t>(n_categories) * d);
}

double IvaeModel::clamp_logvar(double v) const { return std::clamp(v, cfg_.logvar_min, cfg_.logvar_max); }

DiagGaussian IvaeModel::prior_params(int w) const {
  const auto d = static_cast<std::size_t>(latent_dim_);
  DiagGaussian g{Vector(d, 0.0), Vector(d, 1.0)};
  if (!known_category(w)) {
    static std::once_flag warned;
    std::call_once(warned, [w] { std::cerr << "warning: unseen proxy category " << w << ", using N(0, I)\n"; });
    return g;
  }
  for (std::size_t k = 0; k < d; ++k) {
    g.mean[k] = prior_mean.value[static_cast<std::size_t>(w) * d + k];
    g.var[k] = std::exp(clamp_logvar(prior_logvar.value[static_cast<std::size_t>(w) * d + k]));
  }
  return g;
}

Vector IvaeModel::encoder_input(std::span<const double> row, int w) const {
  if (row.size() != static_cast<std::size_t>(n_inputs_)) throw ShapeError("ivae: encoder row length mismatch");
  Vector in(static_cast<std::size_t>(n_inputs_ + n_categories_), 0.0);
  std::copy(row.begin(), row.end(), in.begin());
  if (known_category(w)) in[static_cast<std::size_t>(n_inputs_ + w)] = 1.0;
  return in;
}

DiagGaussian IvaeModel::encode(std::span<const double> row, int w) const {
  const Vector out = encoder.evaluate(encoder_input(row, w));
  require_finite(out);
  const auto d = static_cast<std::size_t>(latent_dim_);
  DiagGaussian g{Vector(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d)), Vector(d)};
  for (std::size_t k = 0; k < d; ++k) g.var[k] = std::exp(clamp_logvar(out[d + k]));
  return g;
}

Vector IvaeModel::decode_raw(std::span<const double> c) const {
  if (c.size() != static_cast<std::size_t>(latent_dim_)) throw ShapeError("ivae: latent length mismatch");
  return decoder.evaluate(c);
}

Vector IvaeModel::decode(std::span<const double> c) const {
  Vector out = decode_raw(c);
  if (cfg_.likelihood == Likelihood::kBernoulli) {
    for (double& v : out) v = std::clamp(numerics::sigmoid(v), kProbabilityClamp, 1.0 - kProbabilityClamp);
  }
  return out;
}

namespace {

// Log-likelihood and its derivative with respect to the decoder output.
double log_lik(Likelihood kind, double variance, std::span<const double> target, std::span<const double> raw,
               Vector* grad) {
  double ll = 0.0;
  if (grad != nullptr) grad->assign(raw.size(), 0.0);
  if (kind == Likelihood::kBernoulli) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      // a log σ(l) + (1 − a) log(1 − σ(l)) = a l − softplus(l).
      ll += target[i] * raw[i] - numerics::softplus(raw[i]);
      if (grad != nullptr) (*grad)[i] = target[i] - numerics::sigmoid(raw[i]);
    }
  } else {
    const double norm = -0.5 * std::log(2.0 * std::numbers::pi * variance);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double r = target[i] - raw[i];
      ll += norm - 0.5 * r * r / variance;
      if (grad != nullptr) (*grad)[i] = r / variance;
    }
  }
  return ll;
}

}  // namespace

double IvaeModel::log_likelihood(std::span<const double> target, std::span<const double> c) const {
  if (target.size() != static_cast<std::size_t>(n_outputs_)) throw ShapeError("ivae: target length mismatch");
  const Vector raw = decode_raw(c);
  return log_lik(cfg_.likelihood, cfg_.gaussian_variance, target, raw, nullptr);
}

double IvaeModel::elbo(std::span<const double> row, std::span<const double> target, int w, numerics::Rng& rng) const {
  const auto q = encode(row, w);
  const auto p = prior_params(w);
  const auto draw = numerics::gaussian_sample(q.mean, q.var, rng);
  return log_likelihood(target, draw.sample) - numerics::kl_gaussian_diag(q.mean, q.var, p.mean, p.var);
}

double IvaeModel::loss_and_grad(std::span<const std::size_t> users, const Matrix& inputs, const Matrix& targets,
                                const std::vector<int>& w, numerics::Rng& rng) {
  if (users.empty()) return 0.0;
  const auto d = static_cast<std::size_t>(latent_dim_);
  const double inv_b = 1.0 / static_cast<double>(users.size());
  double loss = 0.0;
  Vector dlogits;
  for (std::size_t u : users) {
    const int wu = w[u];
    const Vector& out = encoder.forward(encoder_input(inputs.row(u), wu));
    require_finite(out);
    Vector mu(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d));
    Vector var(d), sd(d);
    std::vector<bool> inside(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double raw = out[d + k];
      inside[k] = raw > cfg_.logvar_min && raw < cfg_.logvar_max;
      var[k] = std::exp(clamp_logvar(raw));
      sd[k] = std::sqrt(var[k]);
    }
    const auto draw = numerics::gaussian_sample(mu, var, rng);
    const Vector& raw_out = decoder.forward(draw.sample);
    const double ll = log_lik(cfg_.likelihood, cfg_.gaussian_variance, targets.row(u), raw_out, &dlogits);
    const auto prior = prior_params(wu);
    const double kl = numerics::kl_gaussian_diag(mu, var, prior.mean, prior.var);
    loss += inv_b * (kl - ll);

    for (double& g : dlogits) g *= -inv_b;
    const Vector dc = decoder.backward(dlogits);
    const auto kg = numerics::kl_gaussian_diag_gradient(mu, var, prior.mean, prior.var);
    Vector upstream(2 * d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      upstream[k] = dc[k] + inv_b * kg.mu_q[k];
      const double dvar = 0.5 * dc[k] * draw.eps[k] / std::max(sd[k], 1e-300) + inv_b * kg.var_q[k];
      upstream[d + k] = inside[k] ? dvar * var[k] : 0.0;
    }
    encoder.backward(upstream, false);
    if (known_category(wu)) {
      const std::size_t off = static_cast<std::size_t>(wu) * d;
      for (std::size_t k = 0; k < d; ++k) {
        prior_mean.grad[off + k] += inv_b * kg.mu_p[k];
        const double raw = prior_logvar.value[off + k];
        if (raw > cfg_.logvar_min && raw < cfg_.logvar_max) {
          prior_logvar.grad[off + k] += inv_b * kg.var_p[k] * prior.var[k];
        }
      }
    }
  }
  return loss;
}

numerics::ParameterList IvaeModel::parameters() {
  numerics::ParameterList out = encoder.parameters();
  for (auto* p : decoder.parameters()) out.push_back(p);
  out.push_back(&prior_mean);
  out.push_back(&prior_logvar);
  return out;
}

double mean_elbo(const IvaeModel& model, std::span<const std::size_t> users, const Matrix& inputs,
                 const Matrix& targets, const std::vector<int>& w, std::uint64_t seed) {
  if (users.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t u : users) {
    auto rng = numerics::Rng::derive(seed, kValidationStream, u);
    total += model.elbo(inputs.row(u), targets.row(u), w[u], rng);
  }
  return total / static_cast<double>(users.size());
}

IvaeTrainResult train_ivae(const Matrix& inputs, const Matrix& targets, const std::vector<int>& w, int n_categories,
                           const IvaeConfig& cfg) {
  cfg.validate();
  if (inputs.rows() != targets.rows() || inputs.rows() != w.size()) {
    throw ShapeError("train_ivae: inputs, targets and proxies must have one row per user");
  }
  const std::size_t n = inputs.rows();
  auto init_rng = numerics::Rng::derive(cfg.seed, kInitStream);
  IvaeTrainResult res{IvaeModel(static_cast<int>(inputs.cols()), static_cast<int>(targets.cols()), n_categories, cfg,
                                init_rng),
                      {},
                      {},
                      -1,
                      -INFINITY};
  auto& model = res.model;

  auto holdout_rng = numerics::Rng::derive(cfg.seed, kHoldoutStream);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(n)));
  std::vector<bool> is_val(n, false);
  for (auto u : holdout_rng.sample_without_replacement(n, n_val)) is_val[u] = true;
  std::vector<std::size_t> train_users, val_users;
  for (std::size_t u = 0; u < n; ++u) (is_val[u] ? val_users : train_users).push_back(u);
  if (train_users.empty()) throw ValidationError("train_ivae: no training users");

  auto params = model.parameters();
  numerics::Adam opt(params, cfg.adam);
  opt.zero_grad();
  auto rng = numerics::Rng::derive(cfg.seed, kTrainStream);
  std::vector<double> best = numerics::flatten_values(params);
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(train_users);
    double total = 0.0;
    for (std::size_t start = 0; start < train_users.size(); start += cfg.batch_size) {
      const std::size_t m = std::min(cfg.batch_size, train_users.size() - start);
      const double l = model.loss_and_grad(std::span<const std::size_t>(train_users.data() + start, m), inputs,
                                           targets, w, rng);
      if (!std::isfinite(l)) throw NumericError("iVAE ELBO diverged at epoch " + std::to_string(epoch));
      total += l * static_cast<double>(m);
      opt.step();
    }
    res.train_elbo.push_back(-total / static_cast<double>(train_users.size()));
    const double val = val_users.empty() ? res.train_elbo.back()
                                         : mean_elbo(model, val_users, inputs, targets, w, cfg.seed);
    if (!std::isfinite(val)) throw NumericError("iVAE validation ELBO is not finite");
    res.validation_elbo.push_back(val);
    if (val > res.best_validation_elbo) {
      res.best_validation_elbo = val;
      res.best_epoch = epoch;
      best = numerics::flatten_values(params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  numerics::load_values(params, best);
  return res;
}

GaussianPosterior posterior(const IvaeModel& model, const Matrix& inputs, const std::vector<int>& w) {
  if (inputs.rows() != w.size()) throw ShapeError("posterior: one proxy per row required");
  const auto d = static_cast<std::size_t>(model.latent_dim());
  GaussianPosterior p{Matrix(inputs.rows(), d), Matrix(inputs.rows(), d)};
  for (std::size_t u = 0; u < inputs.rows(); ++u) {
    const auto g = model.encode(inputs.row(u), w[u]);
    std::copy(g.mean.begin(), g.mean.end(), p.mean.row(u).begin());
    std::copy(g.var.begin(), g.var.end(), p.var.row(u).begin());
  }
  return p;
}

GaussianPosterior align_posterior(const GaussianPosterior& source, const GaussianPosterior& target) {
  const std::size_t n = source.mean.rows();
  const std::size_t d = source.mean.cols();
  if (target.mean.rows() != n || target.mean.cols() != d || source.var.rows() != n || source.var.cols() != d) {
    throw ShapeError("align_posterior: shapes differ");
  }
  if (n <= d + 1) throw DomainError("align_posterior: too few rows");
  Matrix design(n, d + 1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) design(r, k) = source.mean(r, k);
    design(r, d) = 1.0;
  }
  const Matrix design_pinv = numerics::pinv(design);
  // coef(k, t): weight of source coordinate k (or the intercept) in target t.
  const Matrix coef = numerics::matmul(design_pinv, target.mean);
  GaussianPosterior out{numerics::matmul(design, coef), Matrix(n, d)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < d; ++t) {
      double v = 0.0;
      for (std::size_t k = 0; k < d; ++k) v += coef(k, t) * coef(k, t) * source.var(r, k);
      out.var(r, t) = std::max(v, 1e-12);
    }
  }
  return out;
}

FusedConfounder::FusedConfounder(GaussianPosterior first, GaussianPosterior second, double rho, double tau)
    : first_(std::move(first)), second_(std::move(second)), rho_(rho), tau_(tau) {
  if (first_.mean.rows() != second_.mean.rows() || first_.mean.cols() != second_.mean.cols()) {
    throw ShapeError("fused posteriors must have equal shapes");
  }
  mean_ = rho_ * first_.mean + tau_ * second_.mean;
}

Vector FusedConfounder::sample(std::size_t user, numerics::Rng& rng) const {
  const auto a = numerics::gaussian_sample(first_.mean.row(user), first_.var.row(user), rng);
  const auto b = numerics::gaussian_sample(second_.mean.row(user), second_.var.row(user), rng);
  Vector c(a.sample.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = rho_ * a.sample[k] + tau_ * b.sample[k];
  return c;
}

Matrix fuse_confounders(const GaussianPosterior& first, const GaussianPosterior& second, double rho, double tau,
                        numerics::Rng& rng) {
  FusedConfounder f(first, second, rho, tau);
  Matrix out(f.users(), f.dim());
  for (std::size_t u = 0; u < f.users(); ++u) {
    const auto c = f.sample(u, rng);
    std::copy(c.begin(), c.end(), out.row(u).begin());
  }
  return out;
}

void save_checkpoint(const IvaeModel& model, const std::filesystem::path& prefix, const nlohmann::ordered_json& extra) {
  IvaeModel copy = model;
  const auto flat = numerics::flatten_values(copy.parameters());
  auto bin = prefix;
  bin += ".bin";
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw IoError("cannot write " + bin.string());
    out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  }
  nlohmann::ordered_json j;
  j["n_inputs"] = model.n_inputs();
  j["n_outputs"] = model.n_outputs();
  j["n_categories"] = model.n_categories();
  j["latent_dim"] = model.latent_dim();
  j["encoder_sizes"] = model.encoder.sizes();
  j["decoder_sizes"] = model.decoder.sizes();
  j["parameter_count"] = flat.size();
  j["config"] = model.config().to_json();
  for (const auto& [k, v] : extra.items()) j[k] = v;
  auto manifest = prefix;
  manifest += ".json";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << j.dump(2) << '\n';
}

IvaeModel load_checkpoint(const std::filesystem::path& prefix) {
  auto manifest = prefix;
  manifest += ".json";
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  IvaeConfig cfg;
  try {
    const auto& c = j.at("config");
    cfg.latent_dim = c.at("latent_dim");
    cfg.encoder_hidden = c.at("encoder_hidden");
    cfg.decoder_hidden = c.at("decoder_hidden");
    cfg.likelihood = c.at("likelihood") == "gaussian" ? Likelihood::kGaussian : Likelihood::kBernoulli;
    cfg.gaussian_variance = c.at("gaussian_variance");
    cfg.logvar_min = c.at("logvar_min");
    cfg.logvar_max = c.at("logvar_max");
    cfg.seed = c.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  numerics::Rng rng(0);
  IvaeModel model(j.at("n_inputs"), j.at("n_outputs"), j.at("n_categories"), cfg, rng);
  auto params = model.parameters();
  std::vector<double> flat(numerics::total_size(params));
  auto bin = prefix;
  bin += ".bin";
  std::ifstream bin_in(bin, std::ios::binary);
  if (!bin_in) throw IoError("cannot open " + bin.string());
  bin_in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (bin_in.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double)) || bin_in.peek() != EOF) {
    throw ValidationError("checkpoint blob size does not match the manifest");
  }
  numerics::load_values(params, flat);
  return model;
}

}  // namespace ividr::ivae
