#include <cmath>
#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "qope/core/csv.hpp"
#include "qope/core/rng.hpp"
#include "qope/core/stats.hpp"
#include "qope/simbench/dgp.hpp"
#include "qope/simbench/experiments.hpp"
#include "test_util.hpp"

using namespace qope;
using core::RngStream;
using simbench::DgpSpec;

namespace {

DgpSpec single_spec(double df, int n) {
  DgpSpec spec;
  spec.kind = DgpSpec::Kind::single_stage;
  spec.df = df;
  spec.n = n;
  return spec;
}

DgpSpec two_spec(double df, int n) {
  DgpSpec spec;
  spec.kind = DgpSpec::Kind::two_stage;
  spec.df = df;
  spec.n = n;
  return spec;
}

simbench::ExperimentConfig tiny_config() {
  simbench::ExperimentConfig cfg;
  cfg.n = 300;
  cfg.num_folds = 2;
  cfg.mc_samples = 8;
  cfg.grid_size = 19;
  cfg.gbdt.rounds = 15;
  cfg.mdn.epochs = 20;
  cfg.oracle_draws = 50000;
  cfg.seed = 11;
  return cfg;
}

double parse_value(const simbench::Table& table, const std::string& cell,
                   const std::string& metric) {
  for (const auto& row : table.rows)
    if (row[1] == cell && row[2] == metric) return std::strtod(row[3].c_str(), nullptr);
  FAIL("aggregate not found: ", cell, " / ", metric);
  return 0.0;
}

}  // namespace

TEST_CASE("single stage generator matches its mechanism") {
  RngStream rng(3);
  const auto data = simbench::gen_single_stage(single_spec(3.0, 100000), rng);
  // Symmetry of X + eps/4 puts half the mass on each action.
  int ones = 0;
  for (const auto& traj : data.trajectories) ones += traj.stages[0].action;
  CHECK(static_cast<double>(ones) / data.size() == doctest::Approx(0.5).epsilon(0.02));
  CHECK(data.horizon == 1);
  CHECK(data.action_space == 2);
}

TEST_CASE("oracle reward models pin the reward formulas") {
  // Median of R | (x, a) equals the location (1 - x + 2ax).
  const auto stage1 = simbench::oracle_reward_model(single_spec(3.0, 1), 1);
  CHECK(stage1->cdf(std::vector<double>{1.0, 0.0, 1.0}, 2.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(stage1->cdf(std::vector<double>{-1.0, 1.0, 0.0}, 2.0) ==
        doctest::Approx(0.5).epsilon(1e-9));
  // Two-stage second reward: location 1 + 0.5 x1 + a1 x1 - x2 + 3 a2 x2.
  const auto stage2 = simbench::oracle_reward_model(two_spec(2.0, 1), 2);
  const std::vector<double> feat{1.0, 0.0, 1.0, 0.3, 1.0, 0.0, 1.0};
  CHECK(stage2->cdf(feat, 4.5) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("two stage generator covariate transition is centered") {
  RngStream rng(7);
  const auto data = simbench::gen_two_stage(two_spec(4.0, 50000), rng);
  double x2_sum = 0.0;
  for (const auto& traj : data.trajectories) x2_sum += traj.stages[1].covariates[0];
  CHECK(x2_sum / data.size() == doctest::Approx(0.0).epsilon(1.0).scale(0.02));
  // First stage reward sd agrees between two independent runs.
  RngStream rng2(8);
  const auto data2 = simbench::gen_two_stage(two_spec(simbench::kNormalNoise, 50000), rng2);
  RngStream rng3(9);
  const auto data3 = simbench::gen_two_stage(two_spec(simbench::kNormalNoise, 50000), rng3);
  auto r1_sd = [](const core::Dataset& d) {
    std::vector<double> r;
    r.reserve(d.size());
    for (const auto& t : d.trajectories) r.push_back(t.stages[0].reward);
    return std::sqrt(core::variance(r));
  };
  CHECK(r1_sd(data2) == doctest::Approx(r1_sd(data3)).epsilon(0.03));
}

TEST_CASE("oracle behavior policy equals the mechanism probability") {
  const auto behavior = simbench::oracle_behavior_policy(single_spec(3.0, 1));
  core::History h;
  h.stage = 1;
  h.covariates = {{0.25}};
  CHECK(behavior.prob(h, 1, 2) == doctest::Approx(core::student_t_cdf(1.0, 3.0)).epsilon(1e-12));
}

TEST_CASE("oracle table quantiles are monotone and reproducible") {
  const auto spec = single_spec(3.0, 1);
  RngStream rng(5);
  const auto oracle = simbench::OracleTable::generate(spec, 200000, rng);
  CHECK(oracle.quantile(0.25) <= oracle.quantile(0.5));
  CHECK(oracle.quantile(0.5) <= oracle.quantile(0.75));
  RngStream rng2(6);
  const auto oracle2 = simbench::OracleTable::generate(spec, 200000, rng2);
  for (double tau : {0.25, 0.5, 0.75}) {
    const double se = oracle.quantile_se(tau) + oracle2.quantile_se(tau);
    CHECK(std::fabs(oracle.quantile(tau) - oracle2.quantile(tau)) < 3.0 * se + 1e-3);
  }
  // cdf is the inverse map of quantile up to grid resolution.
  CHECK(oracle.cdf(oracle.quantile(0.3)) == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("single stage oracle mean has the closed form 1 + sqrt(2/pi)") {
  RngStream rng(13);
  const auto oracle = simbench::OracleTable::generate(single_spec(3.0, 1), 400000, rng);
  CHECK(oracle.mean() == doctest::Approx(1.0 + std::sqrt(2.0 / 3.14159265358979)).epsilon(0.01));
}

TEST_CASE("generator draws are hash stable across releases") {
  RngStream rng(20240001);
  const auto single = simbench::gen_single_stage(single_spec(2.0, 1000), rng);
  RngStream rng2(20240002);
  const auto dual = simbench::gen_two_stage(two_spec(4.0, 1000), rng2);
  // Golden values frozen from the first release of the generators.
  CHECK(simbench::dataset_hash(single) == 4963703299849156685ULL);
  CHECK(simbench::dataset_hash(dual) == 464639862508346075ULL);
}

TEST_CASE("mse experiment report carries regeneration keys and exact aggregates") {
  auto cfg = tiny_config();
  const auto report =
      simbench::run_mse_experiment(DgpSpec::Kind::single_stage, {3.0}, 3, cfg);
  REQUIRE(report.records.rows.size() == 6);  // 3 replicates x 2 methods
  const auto& cols = report.records.columns;
  auto col = [&](const std::string& name) {
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (cols[c] == name) return c;
    FAIL("missing column ", name);
    return std::size_t{0};
  };
  for (const auto& row : report.records.rows) {
    CHECK(row[col("seed")] == std::to_string(cfg.seed));
    CHECK(row[col("folds")] == std::to_string(cfg.num_folds));
    CHECK(row[col("n")] == std::to_string(cfg.n));
  }
  // MSE aggregate equals the mean of the recorded squared errors exactly.
  for (const std::string method : {"rquantile", "rmean"}) {
    double total = 0.0;
    int count = 0;
    for (const auto& row : report.records.rows)
      if (row[col("method")] == method) {
        total += std::strtod(row[col("sq_error")].c_str(), nullptr);
        ++count;
      }
    CHECK(parse_value(report.aggregates, "df=3;method=" + method, "mse") ==
          doctest::Approx(total / count).epsilon(1e-12));
  }
  // Rerunning with the same config reproduces the records byte for byte.
  const auto report2 =
      simbench::run_mse_experiment(DgpSpec::Kind::single_stage, {3.0}, 3, cfg);
  CHECK(report.records.rows == report2.records.rows);
}

TEST_CASE("mse experiment rejects infinite-mean settings") {
  auto cfg = tiny_config();
  CHECK_THROWS_AS(simbench::run_mse_experiment(DgpSpec::Kind::single_stage, {1.0}, 2, cfg),
                  ConfigError);
}

TEST_CASE("coverage experiment smoke") {
  auto cfg = tiny_config();
  const auto report = simbench::run_coverage_experiment(3.0, {0.5}, 4, cfg);
  REQUIRE(report.records.rows.size() == 4);
  const double coverage = parse_value(report.aggregates, "tau=0.5", "coverage");
  CHECK(coverage >= 0.0);
  CHECK(coverage <= 1.0);
  int hits = 0;
  for (const auto& row : report.records.rows) hits += row.back() == "1" ? 1 : 0;
  CHECK(coverage == doctest::Approx(static_cast<double>(hits) / 4).epsilon(1e-12));
}

TEST_CASE("cdf overlay emits one row per level") {
  auto cfg = tiny_config();
  const auto report = simbench::run_cdf_overlay(DgpSpec::Kind::single_stage, 3.0, 5, cfg);
  CHECK(report.records.rows.size() == 5);
  // Levels are g/(T+1).
  CHECK(report.records.rows[0][2] == core::format_double(1.0 / 6.0));
}

TEST_CASE("csv writer embeds the resolved config as comments") {
  auto cfg = tiny_config();
  const auto report = simbench::run_cdf_overlay(DgpSpec::Kind::single_stage, 3.0, 2, cfg);
  std::ostringstream out;
  report.records.write_csv(out, report.config);
  const std::string text = out.str();
  CHECK(text.find("# experiment=fig3") != std::string::npos);
  CHECK(text.find("# seed=11") != std::string::npos);
  CHECK(text.find("# folds=2") != std::string::npos);
}

TEST_CASE("method comparison smoke: three estimators per level") {
  auto cfg = tiny_config();
  const auto report = simbench::run_method_comparison(single_spec(3.0, cfg.n), {0.5}, 3, cfg);
  REQUIRE(report.records.rows.size() == 9);  // 3 methods x 3 replicates
  int mse_rows = 0;
  for (const auto& row : report.aggregates.rows)
    if (row[2] == "mse") ++mse_rows;
  CHECK(mse_rows == 3);
}

TEST_CASE("bandwidth sweep smoke: fixed rules plus scott") {
  auto cfg = tiny_config();
  const auto report = simbench::run_bandwidth_sweep({0.1, 0.2}, true, 3.0, {0.5}, 3, cfg);
  // 3 replicates x 3 rules x 1 tau records.
  REQUIRE(report.records.rows.size() == 9);
  int se_rows = 0;
  bool scott_seen = false;
  for (const auto& row : report.aggregates.rows) {
    if (row[2] == "se_mse") ++se_rows;
    if (row[1].find("scott") != std::string::npos) scott_seen = true;
  }
  CHECK(se_rows == 3);
  CHECK(scott_seen);
}

TEST_CASE("one shot oracle helpers agree with the table") {
  RngStream a(31), b(31);
  const auto spec = single_spec(3.0, 1);
  const double q = simbench::oracle_quantile(spec, 0.5, 20000, a);
  const auto table = simbench::OracleTable::generate(spec, 20000, b);
  CHECK(q == table.quantile(0.5));
}
