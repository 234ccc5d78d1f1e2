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

#include <filesystem>
#include <fstream>
#include <set>

#include "ividr/common/error.h"
#include "ividr/pipeline/config.h"
#include "ividr/pipeline/runner.h"
#include "temp_dir.h"

namespace ividr::pipeline {
namespace {

using recmodel::Variant;
using testing::TempDir;
using testing::read_file;

constexpr const char* kTiny = R"(
[data]
preset = desk
n_users = 120
n_items = 40
unbiased_per_user = 10

[experiment]
variants = MF, IViDR
seeds = 1,2

[iv]
epochs = 1
warm_start_epochs = 1

[ivae]
max_epochs = 3

[recmodel]
epochs = 2
learning_rates = 1e-3
weight_decays = 1e-6
)";

ExperimentConfig tiny() { return parse_config(kTiny); }

RunOptions opts_in(const std::filesystem::path& dir) {
  RunOptions o;
  o.run_dir = dir;
  return o;
}

nlohmann::json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

TEST(ConfigTest, ParsesSectionsAndPresetFirst) {
  const auto cfg = tiny();
  EXPECT_EQ(cfg.data.synthetic.n_users, 120);
  EXPECT_EQ(cfg.data.synthetic.n_items, 40);
  EXPECT_EQ(cfg.variants, (std::vector<Variant>{Variant::kMF, Variant::kIViDR}));
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(cfg.rec.epochs, 2);
  EXPECT_EQ(cfg.rec.learning_rates, std::vector<double>{1e-3});
}

TEST(ConfigTest, UnknownKeyIsRejected) {
  EXPECT_THROW(parse_config("[data]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nosuch]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nvariants = Foo\n"), ConfigError);
}

TEST(ConfigTest, OverridesApply) {
  auto cfg = tiny();
  apply_override(cfg, "experiment.rho=0.4");
  apply_override(cfg, "recmodel.dim=8");
  EXPECT_DOUBLE_EQ(cfg.rho, 0.4);
  EXPECT_EQ(cfg.rec.dim, 8);
  EXPECT_THROW(apply_override(cfg, "experiment.rho"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "experiment.nope=1"), ConfigError);
}

TEST(ConfigTest, InvariantsAreValidated) {
  auto cfg = tiny();
  cfg.seeds.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.rho = -0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.tau_sweep = {0.0, 1.2, 0.2};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ConfigTest, SweepAxisHasSixPoints) {
  const auto pts = parse_axis("0:1:0.2").points();
  ASSERT_EQ(pts.size(), 6u);
  EXPECT_DOUBLE_EQ(pts.front(), 0.0);
  EXPECT_NEAR(pts.back(), 1.0, 1e-12);
  EXPECT_THROW(parse_axis("0:1"), ConfigError);
  EXPECT_THROW(parse_axis("1:0:0.2"), ConfigError);
}

TEST(ConfigTest, SeedRanges) {
  EXPECT_EQ(parse_seeds("1,2,5-7"), (std::vector<std::uint64_t>{1, 2, 5, 6, 7}));
  EXPECT_THROW(parse_seeds(""), ConfigError);
  EXPECT_THROW(parse_seeds("3-1"), ConfigError);
}

TEST(ConfigTest, Presets) {
  EXPECT_EQ(preset_config("paper").data.synthetic.n_users, 10000);
  EXPECT_EQ(preset_config("paper").data.synthetic.n_items, 1000);
  EXPECT_EQ(preset_config("desk").data.synthetic.n_users, 2000);
  EXPECT_EQ(preset_config("desk").data.synthetic.n_items, 300);
  EXPECT_THROW(preset_config("huge"), ConfigError);
}

TEST(ConfigTest, JsonRoundTripsThroughText) {
  const auto a = tiny().to_json().dump();
  const auto b = tiny().to_json().dump();
  EXPECT_EQ(a, b);
}

TEST(WiringTest, BaselineNeverRunsIvStage) {
  const auto cfg = tiny();
  SeedContext ctx(cfg, 1);
  const auto f = ctx.fused(Variant::kIDCF, cfg.rho, cfg.tau);
  ASSERT_TRUE(f.has_value());
  EXPECT_FALSE(ctx.iv_stage_ran());
  EXPECT_FALSE(ctx.fused(Variant::kMF, cfg.rho, cfg.tau).has_value());
  EXPECT_FALSE(ctx.iv_stage_ran());
  // iDCF-baseline uses C2 only.
  EXPECT_EQ(f->mean(), ctx.raw_posterior().mean);
}

TEST(WiringTest, AblationCombinations) {
  EXPECT_EQ(recmodel::combination_for(Variant::kIViDR), iv::Combination::kLearned);
  EXPECT_EQ(recmodel::combination_for(Variant::kIViDRT), iv::Combination::kTreatment);
  EXPECT_EQ(recmodel::combination_for(Variant::kIViDRF), iv::Combination::kFittedOnly);
  EXPECT_EQ(recmodel::combination_for(Variant::kIViDRR), iv::Combination::kResidualOnly);
  const auto cfg = tiny();
  SeedContext ctx(cfg, 1);
  const auto& r = ctx.iv_result(iv::Combination::kFittedOnly);
  EXPECT_EQ(r.mode, iv::Combination::kFittedOnly);
  for (const auto& item : r.items) {
    if (item.excluded) continue;
    EXPECT_EQ(item.alpha1, 1.0);
    EXPECT_EQ(item.alpha2, 0.0);
  }
  EXPECT_TRUE(ctx.iv_stage_ran());
}

TEST(WiringTest, PreparedDataShapes) {
  const auto cfg = tiny();
  const auto d = prepare_data(cfg, 3);
  EXPECT_EQ(d.n_users, 120);
  EXPECT_EQ(d.n_items, 40);
  EXPECT_EQ(d.exposure.rows(), 120u);
  EXPECT_EQ(d.exposure.cols(), 40u);
  ASSERT_TRUE(d.truth_c.has_value());
  EXPECT_EQ(d.truth_c->rows(), 120u);
  EXPECT_EQ(d.proxy.size(), 120u);
  EXPECT_FALSE(d.test.empty());
  EXPECT_FALSE(d.validation.empty());
}

TEST(RunTest, TwoRowsPerSeedAndProvenance) {
  TempDir tmp;
  const auto cfg = tiny();
  const auto s = run_experiment(cfg, opts_in(tmp.path()));
  EXPECT_TRUE(s.all_ok);
  ASSERT_EQ(s.cells.size(), 4u);
  std::set<std::pair<std::uint64_t, std::string>> keys;
  for (const auto& c : s.cells) {
    EXPECT_TRUE(c.ok) << c.error;
    keys.insert({c.seed, c.variant});
    EXPECT_GE(c.ndcg, 0.0);
    EXPECT_LE(c.ndcg, 1.0);
    EXPECT_EQ(c.mcc.has_value(), c.variant == "IViDR");
  }
  EXPECT_EQ(keys.size(), 4u);
  const auto report = load_json(tmp.path() / "report.json");
  EXPECT_EQ(report.at("build_id"), build_id());
  EXPECT_EQ(report.at("config"), nlohmann::json::parse(cfg.to_json().dump()));
  const auto csv = read_file(tmp.path() / "metrics.csv");
  EXPECT_EQ(csv.rfind("# build_id=", 0), 0u);
  EXPECT_NE(csv.find("# config={"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "cells" / "seed-1" / "MF.json"));
}

TEST(RunTest, SameSeedGivesIdenticalReports) {
  TempDir a, b;
  auto cfg = tiny();
  cfg.seeds = {4};
  run_experiment(cfg, opts_in(a.path()));
  auto o = opts_in(b.path());
  o.jobs = 2;
  run_experiment(cfg, o);
  EXPECT_EQ(read_file(a.path() / "report.json"), read_file(b.path() / "report.json"));
  EXPECT_EQ(read_file(a.path() / "metrics.csv"), read_file(b.path() / "metrics.csv"));
}

TEST(RunTest, ResumeReusesCompletedCells) {
  TempDir tmp;
  auto cfg = tiny();
  cfg.seeds = {1};
  run_experiment(cfg, opts_in(tmp.path()));
  // Tamper with one finished cell: a resumed run must keep the stored value,
  // and must recompute the cell whose file is gone.
  const auto mf = tmp.path() / "cells" / "seed-1" / "MF.json";
  auto j = load_json(mf);
  j["cell"]["ndcg"] = 0.123;
  std::ofstream(mf) << j.dump();
  const auto ividr = tmp.path() / "cells" / "seed-1" / "IViDR.json";
  const double original = load_json(ividr)["cell"]["ndcg"].get<double>();
  std::filesystem::remove(ividr);

  auto o = opts_in(tmp.path());
  o.resume = true;
  const auto s = run_experiment(cfg, o);
  ASSERT_EQ(s.cells.size(), 2u);
  EXPECT_DOUBLE_EQ(s.cells[0].ndcg, 0.123);
  EXPECT_DOUBLE_EQ(s.cells[1].ndcg, original);
  EXPECT_TRUE(std::filesystem::exists(ividr));
}

TEST(RunTest, ResumeIgnoresCellsFromAnotherConfig) {
  TempDir tmp;
  auto cfg = tiny();
  cfg.seeds = {1};
  cfg.variants = {Variant::kMF};
  run_experiment(cfg, opts_in(tmp.path()));
  const auto mf = tmp.path() / "cells" / "seed-1" / "MF.json";
  auto j = load_json(mf);
  j["cell"]["ndcg"] = 0.123;
  std::ofstream(mf) << j.dump();
  cfg.rec.dim = 8;
  auto o = opts_in(tmp.path());
  o.resume = true;
  const auto s = run_experiment(cfg, o);
  EXPECT_NE(s.cells[0].ndcg, 0.123);
}

TEST(RunTest, FailedCellIsRecordedNotFatal) {
  TempDir tmp;
  auto cfg = tiny();
  cfg.seeds = {1};
  cfg.data.source = SourceKind::kFile;
  cfg.data.path = tmp.path() / "missing.tsv";
  const auto s = run_experiment(cfg, opts_in(tmp.path()));
  EXPECT_FALSE(s.all_ok);
  ASSERT_EQ(s.cells.size(), 2u);
  EXPECT_FALSE(s.cells[0].ok);
  EXPECT_FALSE(s.cells[0].error.empty());
  EXPECT_FALSE(load_json(tmp.path() / "report.json").at("all_ok").get<bool>());
}

TEST(SweepTest, SixPointSeries) {
  TempDir tmp;
  auto cfg = tiny();
  cfg.seeds = {1};
  const auto s = run_sweep(cfg, opts_in(tmp.path()));
  EXPECT_TRUE(s.all_ok);
  int rho = 0, tau = 0;
  for (const auto& p : s.points) (p.axis == "rho" ? rho : tau)++;
  EXPECT_EQ(rho, 6);
  EXPECT_EQ(tau, 6);
  const auto series = load_json(tmp.path() / "report.json").at("series");
  EXPECT_EQ(series.at("rho").size(), 6u);
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "sweep_rho.csv"));
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "sweep_tau.csv"));
}

TEST(MccStudyTest, RowsPerGammaAndFlag) {
  TempDir tmp;
  auto cfg = tiny();
  cfg.seeds = {1};
  cfg.gammas = {0, 20};
  const auto s = run_mcc_study(cfg, opts_in(tmp.path()));
  EXPECT_TRUE(s.all_ok);
  EXPECT_EQ(s.rows.size(), 4u);
  for (const auto& r : s.rows) {
    EXPECT_GE(r.mcc, 0.0);
    EXPECT_LE(r.mcc, 1.0);
  }
  const auto report = load_json(tmp.path() / "report.json");
  EXPECT_TRUE(report.at("table").at("IViDR").contains("monotone_degradation"));
  EXPECT_DOUBLE_EQ(report.at("reference_full_scale").at("IViDR")[0].get<double>(), 0.8405);
}

TEST(MccStudyTest, NeedsSyntheticSource) {
  TempDir tmp;
  auto cfg = tiny();
  cfg.data.source = SourceKind::kCoat;
  cfg.data.path = tmp.path();
  EXPECT_THROW(run_mcc_study(cfg, opts_in(tmp.path())), ConfigError);
}

}  // namespace
}  // namespace ividr::pipeline
