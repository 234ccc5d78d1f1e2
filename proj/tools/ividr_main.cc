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

// Command-line front end: generate, run, ablate, sweep, mcc-study.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ividr/common/error.h"
#include "ividr/datagen/generator.h"
#include "ividr/pipeline/config.h"
#include "ividr/pipeline/runner.h"

namespace {

using namespace ividr;

enum Exit { kOk = 0, kCellsFailed = 1, kUsage = 2, kIo = 3, kInternal = 4 };

struct CommonFlags {
  std::string config;
  std::string preset;
  std::string seeds;
  std::string out;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool resume = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "synthetic preset")->check(CLI::IsMember({"paper", "desk", "coat"}));
  cmd->add_option("--seed,--seeds", f.seeds, "seed list, e.g. 1,2,5-8");
  cmd->add_option("--out", f.out, "output root (default: $IVIDR_OUT or ./runs)");
  cmd->add_option("--set", f.overrides, "section.key=value override (repeatable)");
  cmd->add_option("--jobs,-j", f.jobs, "parallel workers")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet,-q", f.quiet, "no per-cell progress");
}

pipeline::ExperimentConfig resolve(const CommonFlags& f) {
  auto cfg = f.config.empty() ? pipeline::preset_config(f.preset.empty() ? "desk" : f.preset)
                              : pipeline::load_config(f.config);
  if (!f.config.empty() && !f.preset.empty()) pipeline::apply_override(cfg, "data.preset=" + f.preset);
  for (const auto& o : f.overrides) pipeline::apply_override(cfg, o);
  if (!f.seeds.empty()) cfg.seeds = pipeline::parse_seeds(f.seeds);
  cfg.validate();
  return cfg;
}

std::filesystem::path output_root(const CommonFlags& f) {
  if (!f.out.empty()) return f.out;
  if (const char* env = std::getenv("IVIDR_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

pipeline::RunOptions options(const CommonFlags& f, const std::string& command) {
  pipeline::RunOptions o;
  o.command = command;
  o.jobs = f.jobs;
  o.resume = f.resume;
  o.verbose = !f.quiet;
  if (f.resume) {
    if (f.out.empty()) throw ConfigError("--resume needs --out pointing at the run directory");
    o.run_dir = f.out;
  } else {
    o.run_dir = pipeline::make_run_dir(output_root(f), command);
  }
  return o;
}

void print_report(const pipeline::RunSummary& s) {
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& metric : s.report.metrics()) {
    std::cout << metric << '\n';
    for (const auto& v : s.report.variants()) {
      const auto m = s.report.summary(v, metric);
      if (m.n == 0) continue;
      std::cout << "  " << std::left << std::setw(15) << v << std::right << m.mean << " +- " << m.std
                << "  (n=" << m.n << ')';
      if (m.p_value) std::cout << "  p=" << *m.p_value;
      std::cout << '\n';
    }
  }
  for (const auto& c : s.cells) {
    if (!c.ok) std::cout << "FAILED seed " << c.seed << ' ' << c.variant << ": " << c.error << '\n';
  }
}

int cmd_generate(const CommonFlags& f) {
  const auto cfg = resolve(f);
  if (cfg.data.source != pipeline::SourceKind::kSynthetic) throw ConfigError("generate needs a synthetic source");
  const auto root = output_root(f);
  std::filesystem::create_directories(root);
  const auto dir = pipeline::make_run_dir(root, "generate");
  for (auto seed : cfg.seeds) {
    auto gen = cfg.data.synthetic;
    gen.seed = seed;
    const auto ds = datagen::generate(gen);
    const auto bundle = dir / ("seed-" + std::to_string(seed));
    datagen::write_synthetic_bundle(bundle, ds, gen,
                                    {{"build_id", pipeline::build_id()}, {"experiment_config", cfg.to_json()}});
    std::cout << bundle.string() << ": " << gen.n_users << " x " << gen.n_items << ", "
              << ds.data.triples.size() << " ratings\n";
  }
  return kOk;
}

int cmd_run(pipeline::ExperimentConfig cfg, const pipeline::RunOptions& o) {
  const auto s = pipeline::run_experiment(cfg, o);
  print_report(s);
  std::cout << "run directory: " << o.run_dir.string() << '\n';
  return s.all_ok ? kOk : kCellsFailed;
}

int cmd_sweep(const pipeline::ExperimentConfig& cfg, const pipeline::RunOptions& o) {
  const auto s = pipeline::run_sweep(cfg, o);
  std::cout << std::fixed << std::setprecision(4) << "axis  value  seed  ndcg   recall\n";
  for (const auto& p : s.points)
    std::cout << p.axis << "  " << p.value << "  " << p.seed << "  " << p.ndcg << "  " << p.recall << '\n';
  for (const auto& e : s.errors) std::cout << "FAILED " << e << '\n';
  std::cout << "run directory: " << o.run_dir.string() << '\n';
  return s.all_ok ? kOk : kCellsFailed;
}

int cmd_mcc(const pipeline::ExperimentConfig& cfg, const pipeline::RunOptions& o) {
  const auto s = pipeline::run_mcc_study(cfg, o);
  std::cout << std::fixed << std::setprecision(4) << "gamma  iDCF-baseline  IViDR\n";
  for (double g : cfg.gammas)
    std::cout << g << "  " << s.mean("iDCF-baseline", g) << "  " << s.mean("IViDR", g) << '\n';
  for (const auto& e : s.errors) std::cout << "FAILED " << e << '\n';
  std::cout << "run directory: " << o.run_dir.string() << '\n';
  return s.all_ok ? kOk : kCellsFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IViDR debiased recommendation experiments"};
  app.require_subcommand(1);

  CommonFlags gen_f, run_f, abl_f, sweep_f, mcc_f;
  std::string variants, rho_axis, tau_axis, run_sweep_arg, gammas;

  auto* gen = app.add_subcommand("generate", "write synthetic dataset bundles");
  add_common(gen, gen_f);

  auto* run = app.add_subcommand("run", "train and evaluate variants over seeds");
  add_common(run, run_f);
  run->add_option("--variants", variants, "comma list (MF,IViDR,IViDR-T,IViDR-F,IViDR-R,iDCF-baseline)");
  run->add_option("--sweep", run_sweep_arg, "rho=a:b:step or tau=a:b:step; runs the sweep instead");
  run->add_flag("--resume", run_f.resume, "reuse completed cells in --out");

  auto* abl = app.add_subcommand("ablate", "IViDR against its ablations and the iDCF baseline");
  add_common(abl, abl_f);
  abl->add_flag("--resume", abl_f.resume, "reuse completed cells in --out");

  auto* sweep = app.add_subcommand("sweep", "rho and tau sweeps for IViDR");
  add_common(sweep, sweep_f);
  sweep->add_option("--rho", rho_axis, "start:stop:step (default 0:1:0.2)");
  sweep->add_option("--tau", tau_axis, "start:stop:step (default 0:1:0.2)");

  auto* mcc = app.add_subcommand("mcc-study", "confounder recovery versus exposure noise");
  add_common(mcc, mcc_f);
  mcc->add_option("--gammas", gammas, "comma list of noise levels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_f);
    if (*run) {
      auto cfg = resolve(run_f);
      if (!variants.empty()) pipeline::apply_override(cfg, "experiment.variants=" + variants);
      if (!run_sweep_arg.empty()) {
        const auto eq = run_sweep_arg.find('=');
        if (eq == std::string::npos) throw ConfigError("--sweep expects rho=a:b:step or tau=a:b:step");
        pipeline::apply_override(cfg, "sweep." + run_sweep_arg.substr(0, eq) + "=" + run_sweep_arg.substr(eq + 1));
        return cmd_sweep(cfg, options(run_f, "sweep"));
      }
      return cmd_run(cfg, options(run_f, "run"));
    }
    if (*abl) {
      auto cfg = resolve(abl_f);
      pipeline::apply_override(cfg, "experiment.variants=IViDR,IViDR-F,IViDR-R,IViDR-T,iDCF-baseline");
      pipeline::apply_override(cfg, "experiment.baseline=iDCF-baseline");
      if (abl_f.seeds.empty()) cfg.seeds = pipeline::parse_seeds("1-10");
      return cmd_run(cfg, options(abl_f, "ablate"));
    }
    if (*sweep) {
      auto cfg = resolve(sweep_f);
      if (!rho_axis.empty()) pipeline::apply_override(cfg, "sweep.rho=" + rho_axis);
      if (!tau_axis.empty()) pipeline::apply_override(cfg, "sweep.tau=" + tau_axis);
      return cmd_sweep(cfg, options(sweep_f, "sweep"));
    }
    if (*mcc) {
      auto cfg = resolve(mcc_f);
      if (!gammas.empty()) pipeline::apply_override(cfg, "experiment.gammas=" + gammas);
      return cmd_mcc(cfg, options(mcc_f, "mcc-study"));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
