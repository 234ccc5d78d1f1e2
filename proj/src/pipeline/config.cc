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

#include "ividr/pipeline/config.h"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ividr/common/error.h"

namespace ividr::pipeline {
namespace {

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + raw + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = boost::algorithm::to_lower_copy(trim(raw));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, raw, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    p = trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const auto& p : split_list(raw)) out.push_back(parse_number<double>(key, p));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

#define IVIDR_NUM(expr, type) [](ExperimentConfig& c, const std::string& k, const std::string& v) { expr = parse_number<type>(k, v); }

SourceKind parse_source(const std::string& raw) {
  const std::string s = boost::algorithm::to_lower_copy(trim(raw));
  if (s == "synthetic") return SourceKind::kSynthetic;
  if (s == "bundle") return SourceKind::kBundle;
  if (s == "coat") return SourceKind::kCoat;
  if (s == "file") return SourceKind::kFile;
  throw ConfigError("data.source must be synthetic, bundle, coat or file (got '" + raw + "')");
}

const char* source_name(SourceKind k) {
  switch (k) {
    case SourceKind::kSynthetic:
      return "synthetic";
    case SourceKind::kBundle:
      return "bundle";
    case SourceKind::kCoat:
      return "coat";
    case SourceKind::kFile:
      return "file";
  }
  return "?";
}

datasets::ProxyRule::Kind parse_proxy_kind(const std::string& raw) {
  const std::string s = boost::algorithm::to_lower_copy(trim(raw));
  if (s == "passthrough" || s == "pass-through") return datasets::ProxyRule::Kind::kPassThrough;
  if (s == "mean-rating-quartile") return datasets::ProxyRule::Kind::kMeanRatingQuartile;
  if (s == "feature-column") return datasets::ProxyRule::Kind::kFeatureColumn;
  throw ConfigError("data.proxy must be passthrough, mean-rating-quartile or feature-column");
}

const char* proxy_kind_name(datasets::ProxyRule::Kind k) {
  switch (k) {
    case datasets::ProxyRule::Kind::kPassThrough:
      return "passthrough";
    case datasets::ProxyRule::Kind::kMeanRatingQuartile:
      return "mean-rating-quartile";
    case datasets::ProxyRule::Kind::kFeatureColumn:
      return "feature-column";
  }
  return "?";
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.source", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.source = parse_source(v); }},
      {"data.preset",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.data.preset = trim(v);
         c.data.synthetic = datagen::preset(c.data.preset);
       }},
      {"data.path", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.path = trim(v); }},
      {"data.format",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         const std::string s = boost::algorithm::to_lower_copy(trim(v));
         if (s == "tsv") {
           c.data.format = datasets::InputFormat::kTsvTriples;
         } else if (s == "dense") {
           c.data.format = datasets::InputFormat::kDenseMatrix;
         } else {
           throw ConfigError("data.format must be tsv or dense");
         }
       }},
      {"data.proxy", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.proxy.kind = parse_proxy_kind(v); }},
      {"data.proxy_column", IVIDR_NUM(c.data.proxy.column, int)},
      {"data.positive_threshold", IVIDR_NUM(c.data.positive_threshold, int)},
      {"data.validation_fraction", IVIDR_NUM(c.data.validation_fraction, double)},
      {"data.n_users", IVIDR_NUM(c.data.synthetic.n_users, int)},
      {"data.n_items", IVIDR_NUM(c.data.synthetic.n_items, int)},
      {"data.alpha", IVIDR_NUM(c.data.synthetic.alpha, double)},
      {"data.beta", IVIDR_NUM(c.data.synthetic.beta, double)},
      {"data.gamma", IVIDR_NUM(c.data.synthetic.gamma, double)},
      {"data.unbiased_per_user", IVIDR_NUM(c.data.synthetic.unbiased_per_user, int)},
      {"data.feature_dim", IVIDR_NUM(c.data.synthetic.feature_dim, int)},
      {"experiment.variants",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.variants.clear();
         for (const auto& p : split_list(v)) c.variants.push_back(recmodel::parse_variant(p));
         if (c.variants.empty()) throw ConfigError("config key '" + k + "': empty list");
       }},
      {"experiment.seeds", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.seeds = parse_seeds(v); }},
      {"experiment.rho", IVIDR_NUM(c.rho, double)},
      {"experiment.tau", IVIDR_NUM(c.tau, double)},
      {"experiment.k", IVIDR_NUM(c.k, std::size_t)},
      {"experiment.baseline", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.baseline = trim(v); }},
      {"experiment.gammas", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.gammas = parse_doubles(k, v); }},
      {"iv.embedding_dim", IVIDR_NUM(c.iv.embedding_dim, int)},
      {"iv.hidden", IVIDR_NUM(c.iv.hidden, int)},
      {"iv.n_max", IVIDR_NUM(c.iv.n_max, int)},
      {"iv.scale", IVIDR_NUM(c.iv.scale, double)},
      {"iv.warm_start_epochs", IVIDR_NUM(c.iv.warm_start_epochs, int)},
      {"iv.epochs", IVIDR_NUM(c.iv.epochs, int)},
      {"iv.batch_size", IVIDR_NUM(c.iv.batch_size, std::size_t)},
      {"iv.learning_rate", IVIDR_NUM(c.iv.adam.learning_rate, double)},
      {"iv.weight_decay", IVIDR_NUM(c.iv.adam.weight_decay, double)},
      {"iv.negatives", IVIDR_NUM(c.iv.negatives, int)},
      {"ivae.latent_dim", IVIDR_NUM(c.ivae.latent_dim, int)},
      {"ivae.encoder_hidden", IVIDR_NUM(c.ivae.encoder_hidden, int)},
      {"ivae.decoder_hidden", IVIDR_NUM(c.ivae.decoder_hidden, int)},
      {"ivae.batch_size", IVIDR_NUM(c.ivae.batch_size, std::size_t)},
      {"ivae.max_epochs", IVIDR_NUM(c.ivae.max_epochs, int)},
      {"ivae.patience", IVIDR_NUM(c.ivae.patience, int)},
      {"ivae.holdout_fraction", IVIDR_NUM(c.ivae.holdout_fraction, double)},
      {"ivae.learning_rate", IVIDR_NUM(c.ivae.adam.learning_rate, double)},
      {"recmodel.dim", IVIDR_NUM(c.rec.dim, int)},
      {"recmodel.epochs", IVIDR_NUM(c.rec.epochs, int)},
      {"recmodel.batch_size", IVIDR_NUM(c.rec.batch_size, std::size_t)},
      {"recmodel.negatives", IVIDR_NUM(c.rec.negatives, int)},
      {"recmodel.phi", IVIDR_NUM(c.rec.phi, double)},
      {"recmodel.lambda", IVIDR_NUM(c.rec.lambda, double)},
      {"recmodel.learning_rates",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.rec.learning_rates = parse_doubles(k, v); }},
      {"recmodel.weight_decays",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.rec.weight_decays = parse_doubles(k, v); }},
      {"recmodel.mlp_head",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.rec.head.mlp = parse_bool(k, v); }},
      {"recmodel.head_hidden", IVIDR_NUM(c.rec.head.hidden, int)},
      {"sweep.rho", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.rho_sweep = parse_axis(v); }},
      {"sweep.tau", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.tau_sweep = parse_axis(v); }},
  };
  return table;
}

#undef IVIDR_NUM

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

}  // namespace

std::vector<double> SweepAxis::points() const {
  std::vector<double> out;
  if (!(step > 0.0) || stop < start) throw ConfigError("sweep axis needs step > 0 and stop >= start");
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

SweepAxis parse_axis(const std::string& text) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::is_any_of(":"));
  if (parts.size() != 3) throw ConfigError("sweep axis must look like start:stop:step (got '" + text + "')");
  SweepAxis a{parse_number<double>("sweep", parts[0]), parse_number<double>("sweep", parts[1]),
              parse_number<double>("sweep", parts[2])};
  a.points();
  return a;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& p : split_list(text)) {
    const auto dash = p.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_number<std::uint64_t>("seeds", p.substr(0, dash));
      const auto hi = parse_number<std::uint64_t>("seeds", p.substr(dash + 1));
      if (hi < lo) throw ConfigError("seed range '" + p + "' is descending");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_number<std::uint64_t>("seeds", p));
    }
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (variants.empty()) throw ConfigError("at least one variant is required");
  if (k < 1) throw ConfigError("k must be positive");
  if (rho < 0.0 || tau < 0.0) throw ConfigError("rho and tau must be non-negative");
  for (const auto* axis : {&rho_sweep, &tau_sweep}) {
    if (axis->start < 0.0 || axis->stop > 1.0) throw ConfigError("sweep axes must stay within [0, 1]");
    axis->points();
  }
  if (data.source != SourceKind::kSynthetic && data.path.empty()) throw ConfigError("data.path is required");
  if (data.source == SourceKind::kSynthetic) data.synthetic.validate();
  if (!(data.validation_fraction >= 0.0 && data.validation_fraction < 1.0)) {
    throw ConfigError("data.validation_fraction must lie in [0, 1)");
  }
  iv.validate();
  ivae.validate();
  rec.validate();
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json variant_names = nlohmann::ordered_json::array();
  for (auto v : variants) variant_names.push_back(std::string(recmodel::variant_name(v)));
  nlohmann::ordered_json d{{"source", source_name(data.source)},
                           {"preset", data.preset},
                           {"path", data.path.string()},
                           {"format", data.format == datasets::InputFormat::kTsvTriples ? "tsv" : "dense"},
                           {"proxy", proxy_kind_name(data.proxy.kind)},
                           {"proxy_column", data.proxy.column},
                           {"positive_threshold", data.positive_threshold},
                           {"validation_fraction", data.validation_fraction}};
  if (data.source == SourceKind::kSynthetic) d["synthetic"] = data.synthetic.to_json();
  return {{"data", d},
          {"experiment",
           {{"variants", variant_names},
            {"seeds", seeds},
            {"rho", rho},
            {"tau", tau},
            {"k", k},
            {"baseline", baseline},
            {"gammas", gammas}}},
          {"iv", iv.to_json()},
          {"ivae", ivae.to_json()},
          {"recmodel", rec.to_json()},
          {"sweep",
           {{"rho", {rho_sweep.start, rho_sweep.stop, rho_sweep.step}},
            {"tau", {tau_sweep.start, tau_sweep.stop, tau_sweep.step}}}}};
}

ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  ExperimentConfig cfg;
  // The preset resets synthetic settings, so apply it before anything else.
  if (auto preset = tree.get_optional<std::string>("data.preset")) set_key(cfg, "data.preset", *preset);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (full == "data.preset") continue;
      set_key(cfg, full, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like section.key=value");
  set_key(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ExperimentConfig preset_config(const std::string& preset) {
  ExperimentConfig cfg;
  set_key(cfg, "data.preset", preset);
  if (preset == "coat") {
    // Coat runs use 32-dimensional embeddings and a 4-d confounder.
    cfg.rec.dim = 32;
    cfg.ivae.latent_dim = 4;
  }
  return cfg;
}

}  // namespace ividr::pipeline
