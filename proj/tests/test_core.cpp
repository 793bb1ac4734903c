#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "qope/core/csv.hpp"
#include "qope/core/folds.hpp"
#include "qope/core/log.hpp"
#include "qope/core/policy.hpp"
#include "qope/core/rng.hpp"
#include "qope/core/stats.hpp"
#include "qope/core/types.hpp"
#include "test_util.hpp"

using namespace qope;
using core::Dataset;
using core::History;
using core::Policy;
using core::RngStream;
using core::Trajectory;

namespace {

Trajectory make_single(double x, int a, double r) {
  Trajectory t;
  t.stages.push_back({{x}, a, r});
  return t;
}

}  // namespace

TEST_CASE("split_folds equal division and remainder rule") {
  RngStream rng(1);
  auto fa = core::split_folds(10, 5, rng);
  for (const auto& fold : fa.members()) CHECK(fold.size() == 2);

  auto fa2 = core::split_folds(2500, 5, rng);
  for (const auto& fold : fa2.members()) CHECK(fold.size() == 500);

  core::warnings_enabled() = false;
  auto fa3 = core::split_folds(7, 3, rng);
  core::warnings_enabled() = true;
  std::multiset<std::size_t> sizes;
  for (const auto& fold : fa3.members()) sizes.insert(fold.size());
  CHECK(sizes == std::multiset<std::size_t>{2, 2, 3});
}

TEST_CASE("split_folds rejects bad configurations") {
  RngStream rng(1);
  CHECK_THROWS_AS(core::split_folds(5, 0, rng), ConfigError);
  CHECK_THROWS_AS(core::split_folds(5, 6, rng), ConfigError);
}

TEST_CASE("split_folds partitions every index exactly once") {
  RngStream rng(99);
  core::warnings_enabled() = false;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 200);
    const int s = 1 + static_cast<int>(rng.next_u64() % n);
    auto fa = core::split_folds(n, s, rng);
    std::vector<int> seen(n, 0);
    std::size_t min_size = n, max_size = 0;
    for (const auto& fold : fa.members()) {
      min_size = std::min(min_size, fold.size());
      max_size = std::max(max_size, fold.size());
      for (int i : fold) ++seen[i];
    }
    for (int c : seen) CHECK(c == 1);
    CHECK(max_size - min_size <= 1);
  }
  core::warnings_enabled() = true;
}

TEST_CASE("split_folds is deterministic for a fixed stream") {
  RngStream a(42), b(42);
  auto fa = core::split_folds(101, 7, a);
  core::warnings_enabled() = false;
  auto fb = core::split_folds(101, 7, b);
  core::warnings_enabled() = true;
  CHECK(fa.fold_of == fb.fold_of);
}

TEST_CASE("threshold policy probabilities") {
  const Policy pi = Policy::threshold(core::ThresholdRule{0, 0.0, 1, 0});
  History h;
  h.stage = 1;
  h.covariates = {{0.5}};
  CHECK(pi.prob(h, 1, 2) == 1.0);
  CHECK(pi.prob(h, 0, 2) == 0.0);
  h.covariates = {{0.0}};  // boundary goes to the below action
  CHECK(pi.prob(h, 0, 2) == 1.0);
}

TEST_CASE("uniform policy mass") {
  const Policy pi = Policy::uniform(3);
  History h;
  h.stage = 1;
  h.covariates = {{0.7}};
  for (int a = 0; a < 3; ++a) CHECK(pi.prob(h, a, 3) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("policy probabilities normalize over random histories") {
  RngStream rng(7);
  const Policy threshold = Policy::threshold(core::ThresholdRule{0, 0.25, 1, 0});
  const Policy tabular = Policy::tabular({0.2, 0.3, 0.5});
  const Policy callback = Policy::callback([](const History& h, std::span<double> out) {
    const double x = h.covariates.back()[0];
    const double p = 1.0 / (1.0 + std::exp(-x));
    out[0] = 1.0 - p;
    out[1] = 0.25 * p;
    out[2] = 0.75 * p;
  });
  for (int trial = 0; trial < 1000; ++trial) {
    History h;
    h.stage = 1;
    h.covariates = {{rng.normal(), rng.normal()}};
    for (const Policy* pi : {&threshold, &tabular, &callback}) {
      std::vector<double> p(3);
      pi->probs(h, p);
      double total = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("policy sampling is deterministic given the stream") {
  const Policy pi = Policy::tabular({0.3, 0.7});
  History h;
  h.stage = 1;
  h.covariates = {{0.0}};
  RngStream a(5), b(5);
  for (int i = 0; i < 200; ++i) CHECK(pi.sample(h, 2, a) == pi.sample(h, 2, b));
}

TEST_CASE("cumulative reward sums the stages") {
  Trajectory two;
  two.stages.push_back({{0.0}, 0, 1.0});
  two.stages.push_back({{0.0}, 0, 2.0});
  CHECK(core::cumulative_reward(two) == 3.0);
  CHECK(core::cumulative_reward(make_single(0.0, 0, 5.5)) == 5.5);
  Trajectory cancel;
  cancel.stages.push_back({{0.0}, 0, -1.0});
  cancel.stages.push_back({{0.0}, 0, 1.0});
  CHECK(core::cumulative_reward(cancel) == 0.0);
}

TEST_CASE("history prefix shape and flatten layout") {
  Trajectory traj;
  traj.stages.push_back({{1.0, 2.0}, 1, 0.5});
  traj.stages.push_back({{3.0}, 0, -0.25});
  const History h2 = core::history_prefix(traj, 2);
  h2.validate();
  CHECK(h2.covariates.size() == 2);
  CHECK(h2.actions.size() == 1);
  CHECK(h2.rewards.size() == 1);
  // [x1 | one-hot a1 | r1 | x2]
  const auto flat = h2.flatten(2);
  const std::vector<double> expected{1.0, 2.0, 0.0, 1.0, 0.5, 3.0};
  CHECK(flat == expected);
  const std::vector<int> dims{2, 1};
  CHECK(History::flat_dim(dims, 2, 2) == 6);
  CHECK_THROWS_AS(core::history_prefix(traj, 3), ContractError);
}

TEST_CASE("dataset validation catches shape violations") {
  std::vector<Trajectory> trajs{make_single(0.0, 0, 1.0), make_single(1.0, 1, 2.0)};
  auto ds = Dataset::from_trajectories(trajs, 2);
  CHECK(ds.horizon == 1);
  CHECK(ds.action_space == 2);
  ds.trajectories[1].stages[0].action = 7;
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds.trajectories[1].stages[0].action = 0;
  ds.trajectories[1].stages[0].covariates.push_back(1.0);
  CHECK_THROWS_AS(ds.validate(), DataError);
}

TEST_CASE("dataset csv round trip") {
  RngStream rng(3);
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 17; ++i) {
    Trajectory t;
    t.stages.push_back({{rng.normal(), rng.normal()}, static_cast<int>(rng.next_u64() % 2),
                        rng.normal()});
    t.stages.push_back({{rng.normal()}, static_cast<int>(rng.next_u64() % 2), rng.normal()});
    trajs.push_back(std::move(t));
  }
  const auto ds = Dataset::from_trajectories(std::move(trajs), 2);
  std::ostringstream out;
  core::write_dataset_csv(out, ds);
  std::istringstream in(out.str());
  const auto back = core::read_dataset_csv(in, 2);
  CHECK(back.horizon == ds.horizon);
  CHECK(back.covariate_dims == ds.covariate_dims);
  REQUIRE(back.size() == ds.size());
  for (int i = 0; i < ds.size(); ++i)
    for (int k = 0; k < ds.horizon; ++k) {
      CHECK(back.trajectories[i].stages[k].covariates == ds.trajectories[i].stages[k].covariates);
      CHECK(back.trajectories[i].stages[k].action == ds.trajectories[i].stages[k].action);
      CHECK(back.trajectories[i].stages[k].reward == ds.trajectories[i].stages[k].reward);
    }
  // Byte-identical when re-serialized.
  std::ostringstream out2;
  core::write_dataset_csv(out2, back);
  CHECK(out.str() == out2.str());
}

TEST_CASE("dataset csv reports row and column of parse failures") {
  const std::string text =
      "traj_id,stage,x_0,action,reward\n"
      "0,1,0.5,1,1.25\n"
      "1,1,oops,0,0.5\n";
  std::istringstream in(text);
  try {
    core::read_dataset_csv(in);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("column 3") != std::string::npos);
  }
}

TEST_CASE("rng streams are reproducible and fork-independent") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  // Forking depends only on identity, not on consumption.
  RngStream c(9), d(9);
  c.normal();
  c.normal();
  auto cf = c.fork("child");
  auto df = d.fork("child");
  for (int i = 0; i < 100; ++i) CHECK(cf.next_u64() == df.next_u64());
  // Sibling forks differ.
  auto f1 = d.fork(1), f2 = d.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
}

TEST_CASE("rng normal and student t moments") {
  RngStream rng(2024);
  const int n = 200000;
  std::vector<double> z(n);
  for (double& v : z) v = rng.normal();
  CHECK(testutil::sample_mean(z) == doctest::Approx(0.0).epsilon(1.0).scale(0.01));
  double var = 0.0;
  for (double v : z) var += v * v;
  CHECK(var / n == doctest::Approx(1.0).epsilon(0.02));

  // t(5): variance df/(df-2) = 5/3.
  std::vector<double> t(n);
  for (double& v : t) v = rng.student_t(5.0);
  double tvar = 0.0;
  for (double v : t) tvar += v * v;
  CHECK(tvar / n == doctest::Approx(5.0 / 3.0).epsilon(0.1));
  // Non-integer df supported; median stays 0.
  std::vector<double> t12(n);
  for (double& v : t12) v = rng.student_t(1.2);
  std::sort(t12.begin(), t12.end());
  CHECK(std::fabs(t12[n / 2]) < 0.02);
}

TEST_CASE("normal quantile and student t cdf reference values") {
  CHECK(core::normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(core::normal_quantile(0.95) == doctest::Approx(1.644854).epsilon(1e-6));
  CHECK(core::normal_cdf(0.0) == doctest::Approx(0.5));
  // t(1) is Cauchy: F(x) = 1/2 + atan(x)/pi.
  CHECK(core::student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-9));
  // t(2): F(x) = 1/2 + x / (2 sqrt(2 + x^2)).
  CHECK(core::student_t_cdf(1.0, 2.0) ==
        doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-9));
  CHECK(core::student_t_cdf(0.0, 3.7) == doctest::Approx(0.5));
  CHECK(core::student_t_cdf(-2.0, 4.0) ==
        doctest::Approx(1.0 - core::student_t_cdf(2.0, 4.0)).epsilon(1e-12));
}

TEST_CASE("empirical quantile uses the ceil(n tau) order statistic") {
  std::vector<double> xs{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(core::empirical_quantile(xs, 0.5) == 5.0);
  CHECK(core::empirical_quantile(xs, 0.05) == 1.0);
  CHECK(core::empirical_quantile(xs, 0.95) == 10.0);
  CHECK(core::empirical_quantile(xs, 0.31) == 4.0);
}
