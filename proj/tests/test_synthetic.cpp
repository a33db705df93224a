#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sparsegp/synthetic.hpp"

using namespace sparsegp;
using namespace sparsegp::synth;
using doctest::Approx;

namespace {

Scenario truth_only(ScenarioTag tag, int n_train, int n_test) {
  Scenario s = make_scenario(tag);
  s.n_train = n_train;
  s.n_test = n_test;
  s.tau2 = 0.0;
  return s;
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("scenario settings") {
  for (auto tag : {ScenarioTag::S1, ScenarioTag::S2, ScenarioTag::S3, ScenarioTag::S4}) {
    const Scenario s = make_scenario(tag);
    CHECK(s.lower == 0.0);
    CHECK(s.upper == 10.0);
    CHECK(s.n_train == 50);
    CHECK(s.n_test == 300);
  }
  CHECK(make_scenario(ScenarioTag::S1).tau2 == 0.1);
  CHECK(make_scenario(ScenarioTag::S2).tau2 == 0.1);
  CHECK(make_scenario(ScenarioTag::S3).tau2 == 0.475);
  CHECK(make_scenario(ScenarioTag::S4).tau2 == 0.506);
  const Scenario d1 = make_scenario(ScenarioTag::D1);
  CHECK(d1.lower == 0.0);
  CHECK(d1.upper == 1.0);
  CHECK(parse_scenario("s3") == ScenarioTag::S3);
  CHECK(parse_scenario("D1") == ScenarioTag::D1);
  CHECK_THROWS_AS(parse_scenario("S5"), ConfigError);
  CHECK(parse_model("m4") == ModelTag::M4);
  CHECK_THROWS_AS(parse_model("M2"), ConfigError);
  CHECK_THROWS_AS(scenario_covariance(ScenarioTag::D1, 0.1, 0.2), std::invalid_argument);
}

TEST_CASE("scenario covariances match their closed forms") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    const double x = u(gen), y = u(gen);
    const double d = std::abs(x - y);
    CHECK(scenario_covariance(ScenarioTag::S1, x, y) == Approx(oracle::matern(2.5, d / 0.5)).epsilon(1e-12));
    CHECK(scenario_covariance(ScenarioTag::S2, x, y) == Approx(oracle::wendland(d, 1.5)).epsilon(1e-12));
    const double vx = 0.05 * std::pow(x - 5.0, 4) + 0.001, vy = 0.05 * std::pow(y - 5.0, 4) + 0.001;
    CHECK(scenario_covariance(ScenarioTag::S3, x, y) ==
          Approx(std::sqrt(vx * vy) * oracle::wendland(d, 0.75)).epsilon(1e-12).scale(1e-300));
    const double sx = 0.2 * std::pow((x - 10.0) / 3.0, 4) + 0.1, sy = 0.2 * std::pow((y - 10.0) / 3.0, 4) + 0.1;
    const double lx = 0.06 * std::pow(x / 3.0, 3) + 0.03, ly = 0.06 * std::pow(y / 3.0, 3) + 0.03;
    const double expect = oracle::pscov(2.5, 1, 0.5 * std::log(sx), std::log(lx), 0.5 * std::log(sy), std::log(ly), d);
    CHECK(scenario_covariance(ScenarioTag::S4, x, y) == Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("scenario covariance matrices are positive semidefinite") {
  const int n = 200;
  for (auto tag : {ScenarioTag::S1, ScenarioTag::S2, ScenarioTag::S3, ScenarioTag::S4}) {
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = scenario_covariance(tag, 10.0 * (i + 0.5) / n, 10.0 * (j + 0.5) / n);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-8 * ev.maxCoeff());
  }
}

TEST_CASE("draw layout") {
  const Scenario s = make_scenario(ScenarioTag::S2);
  const SyntheticDraw d = generate_scenario_draw(s, 11);
  REQUIRE(d.train_x.rows() == 50);
  REQUIRE(d.test_x.rows() == 300);
  CHECK(d.seed == 11);
  for (Eigen::Index k = 0; k < 300; ++k) CHECK(d.test_x(k, 0) == Approx(10.0 * (k + 0.5) / 300.0).epsilon(1e-14));
  CHECK(d.train_x.minCoeff() >= 0.0);
  CHECK(d.train_x.maxCoeff() <= 10.0);
  CHECK((d.train_z - d.train_truth).norm() > 0.0);

  const SyntheticDraw again = generate_scenario_draw(s, 11);
  CHECK(again.train_x == d.train_x);
  CHECK(again.train_z == d.train_z);
  CHECK(again.test_truth == d.test_truth);
  const SyntheticDraw other = generate_scenario_draw(s, 12);
  CHECK(other.train_x != d.train_x);
}

TEST_CASE("noise-free scenario leaves observations equal to the truth") {
  const SyntheticDraw d = generate_scenario_draw(truth_only(ScenarioTag::S1, 20, 10), 4);
  CHECK(d.train_z == d.train_truth);
}

TEST_CASE("observation noise has the scenario variance") {
  Scenario s = make_scenario(ScenarioTag::S3);
  s.n_train = 400;
  s.n_test = 0;
  double ss = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const SyntheticDraw d = generate_scenario_draw(s, seed);
    ss += (d.train_z - d.train_truth).squaredNorm();
    count += 400;
  }
  const double var = ss / count;
  CHECK(std::abs(var - 0.475) < 3.0 * 0.475 * std::sqrt(2.0 / count));
}

TEST_CASE("S1 pooled truth variance is one") {
  const Scenario s = truth_only(ScenarioTag::S1, 50, 300);
  double sum = 0.0, ss = 0.0;
  long count = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SyntheticDraw d = generate_scenario_draw(s, 1000 + seed);
    for (const Vector* v : {&d.train_truth, &d.test_truth}) {
      sum += v->sum();
      ss += v->squaredNorm();
      count += v->size();
    }
  }
  const double mean = sum / count;
  const double var = ss / count - mean * mean;
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("S3 variance is smallest at the centre") {
  // 301 midpoints on [0, 10] put point 150 at x = 5.
  const Scenario s = truth_only(ScenarioTag::S3, 0, 301);
  const int reps = 4000;
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(301);
  for (int r = 0; r < reps; ++r) {
    const SyntheticDraw d = generate_scenario_draw(s, 50000 + r);
    ss += d.test_truth.array().square().matrix();
  }
  const Eigen::VectorXd var = ss / reps;
  CHECK(generate_scenario_draw(s, 0).test_x(150, 0) == Approx(5.0).epsilon(1e-14));
  CHECK(scenario_covariance(ScenarioTag::S3, 5.0, 5.0) == Approx(0.001).epsilon(1e-15));
  CHECK(std::abs(var(150) - 0.001) < 3.0 * 0.001 * std::sqrt(2.0 / reps));
  Eigen::Index argmin = 0;
  var.minCoeff(&argmin);
  CHECK(std::abs(argmin - 150) <= 3);
  for (int k = 0; k < 301; ++k) {
    const double x = 10.0 * (k + 0.5) / 301.0;
    CHECK(scenario_covariance(ScenarioTag::S3, x, x) >= 0.001);
  }
}

TEST_CASE("train and test values come from one joint draw") {
  // Both points sit 0.2 apart: the S1 correlation there is well away from zero.
  Scenario s = truth_only(ScenarioTag::S1, 1, 1);
  s.lower = 4.9;
  s.upper = 5.1;
  const int reps = 4000;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  double expect_sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const SyntheticDraw d = generate_scenario_draw(s, 900000 + r);
    const double a = d.train_truth(0), b = d.test_truth(0);
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
    expect_sum += scenario_covariance(ScenarioTag::S1, d.train_x(0, 0), d.test_x(0, 0));
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  const double expect = expect_sum / reps;
  const double se = (1.0 - expect * expect) / std::sqrt(static_cast<double>(reps));
  CHECK(expect > 0.5);
  CHECK(std::abs(corr - expect) < 3.0 * se + 0.01);
}

TEST_CASE("piecewise ground truth") {
  CHECK(piecewise_ground_truth(0.1) == -1.0);
  CHECK(piecewise_ground_truth(0.3) == 1.0);
  CHECK(piecewise_ground_truth(0.6) == -1.0);
  CHECK(piecewise_ground_truth(0.9) == 1.0);
  CHECK(piecewise_ground_truth(0.25) == -1.0);
  CHECK(piecewise_ground_truth(0.5) == 1.0);
  CHECK(piecewise_ground_truth(0.75) == -1.0);

  const SyntheticDraw d = generate_scenario_draw(make_scenario(ScenarioTag::D1), 2);
  REQUIRE(d.train_x.rows() == 50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    CHECK(d.train_x(i, 0) > 0.0);
    CHECK(d.train_x(i, 0) < 1.0);
    CHECK(d.train_truth(i) == piecewise_ground_truth(d.train_x(i, 0)));
  }
  for (Eigen::Index k = 0; k < d.test_x.rows(); ++k) CHECK(d.test_truth(k) == piecewise_ground_truth(d.test_x(k, 0)));
}

TEST_CASE("rmse") {
  Vector a(3), b(3);
  a << 1, 2, 3;
  CHECK(rmse(a, a) == 0.0);
  Vector p = Vector::Zero(2), t(2);
  t << 3, 4;
  CHECK(rmse(p, t) == Approx(std::sqrt(12.5)).epsilon(1e-14));
  b = a.array() + 0.7;
  CHECK(rmse(b, a) == Approx(0.7).epsilon(1e-14));
  CHECK_THROWS_AS(rmse(a, t), std::invalid_argument);
}

TEST_CASE("rmse grows with the perturbation size") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n01;
  Vector truth(100), dir(100);
  for (int i = 0; i < 100; ++i) {
    truth(i) = n01(gen);
    dir(i) = n01(gen);
  }
  double prev = 0.0;
  for (double s : {0.1, 0.2, 0.5, 1.0, 3.0}) {
    const double r = rmse(truth + s * dir, truth);
    CHECK(r > prev);
    CHECK(r == Approx(s * dir.norm() / 10.0).epsilon(1e-12));
    prev = r;
  }
}

TEST_CASE("gaussian crps") {
  CHECK(crps_gaussian(1.3, 0.0, 1.3) == 0.0);
  CHECK(crps_gaussian(1.0, 0.0, -2.0) == 3.0);
  CHECK(crps_gaussian(0.0, 1.0, 0.0) == Approx(2.0 / std::sqrt(2.0 * M_PI) - 1.0 / std::sqrt(M_PI)).epsilon(1e-14));
  CHECK(crps_gaussian(0.0, 1.0, 0.0) == Approx(0.233695).epsilon(1e-6));
  CHECK_THROWS_AS(crps_gaussian(0.0, -1.0, 0.0), std::invalid_argument);

  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.05, 2.5);
  for (int t = 0; t < 25; ++t) {
    const double mu = u(gen), sigma = s(gen), y = u(gen);
    CHECK(std::abs(crps_gaussian(mu, sigma, y) - oracle::crps_quadrature(mu, sigma, y)) < 1e-6);
  }
}

TEST_CASE("gaussian crps is proper") {
  // Expected score under y ~ N(0, 1) is minimized by the true predictive.
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  std::vector<double> ys(20000);
  for (auto& y : ys) y = n01(gen);
  auto expected = [&](double mu, double sigma) {
    double s = 0.0;
    for (double y : ys) s += crps_gaussian(mu, sigma, y);
    return s / static_cast<double>(ys.size());
  };
  const double best = expected(0.0, 1.0);
  for (auto [mu, sigma] : std::vector<std::pair<double, double>>{{0.3, 1.0}, {0.0, 0.6}, {0.0, 1.6}, {-0.4, 1.3}})
    CHECK(expected(mu, sigma) > best);

  // With the mean on target, a sharper predictive always scores better.
  double prev = 0.0;
  for (double sigma : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double v = crps_gaussian(0.7, sigma, 0.7);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(crps_gaussian(0.7, 0.0, 0.7) == 0.0);
}

TEST_CASE("mixture crps averages draw scores") {
  Matrix means(3, 2), vars(3, 2);
  means << 0.0, 0.5, 1.0, 1.5, 2.0, 2.5;
  vars << 1.0, 4.0, 0.25, 1.0, 0.0, 0.01;
  Vector truth(3);
  truth << 0.2, 1.1, 1.7;
  double expect = 0.0;
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < 2; ++r) expect += crps_gaussian(means(k, r), std::sqrt(vars(k, r)), truth(k)) / 6.0;
  CHECK(mixture_crps(means, vars, truth) == Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(mixture_crps(means, vars, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("model layouts") {
  const Scenario s = make_scenario(ScenarioTag::S3);
  const ModelSettings settings;
  const auto m1 = model_layout(ModelTag::M1, s, settings);
  CHECK(std::holds_alternative<kernels::StationaryMatern>(m1.core));
  CHECK_FALSE(m1.sparse.has_value());
  const auto m3 = model_layout(ModelTag::M3, s, settings);
  CHECK(std::holds_alternative<kernels::StationaryMatern>(m3.core));
  REQUIRE(m3.sparse.has_value());
  CHECK(m3.sparse->n1 == 4);
  CHECK(m3.sparse->n2 == 4);
  CHECK(m3.sparse->bumps.size() == 16);
  const auto m4 = model_layout(ModelTag::M4, s, settings);
  CHECK(std::holds_alternative<kernels::ParametricNonstationary>(m4.core));
  CHECK(m4.sparse.has_value());
}

TEST_CASE("benchmark smoke run") {
  BenchmarkConfig cfg;
  cfg.scenarios = {ScenarioTag::S1, ScenarioTag::S2, ScenarioTag::S3, ScenarioTag::S4};
  cfg.replicates = 1;
  cfg.mcmc_iterations = 0;
  cfg.seed = 17;
  const ScoreTable table = run_benchmark(cfg);
  CHECK(table.rows.size() == 12);
  for (const auto& r : table.rows) {
    CHECK(std::isfinite(r.rmse));
    CHECK(std::isfinite(r.crps));
    CHECK(r.crps >= 0.0);
    if (r.model == ModelTag::M1) {
      CHECK(r.rel_rmse == 1.0);
      CHECK(r.rel_crps == 1.0);
    }
  }
  const auto summary = table.summarize();
  CHECK(summary.size() == 12);
  for (const auto& s : summary) {
    CHECK(s.count == 1);
    if (s.model == ModelTag::M1) {
      CHECK(s.mean_rel_crps == 1.0);
      CHECK(s.q05_rel_crps == 1.0);
      CHECK(s.q95_rel_rmse == 1.0);
    }
  }

  std::ostringstream a, b;
  table.write_raw_csv(a);
  run_benchmark(cfg).write_raw_csv(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("benchmark results do not depend on the worker count") {
  BenchmarkConfig cfg;
  cfg.scenarios = {ScenarioTag::S2};
  cfg.models = {ModelTag::M1, ModelTag::M3};
  cfg.replicates = 3;
  cfg.mcmc_iterations = 60;
  cfg.seed = 5;
  std::ostringstream one, many;
  cfg.workers = 1;
  run_benchmark(cfg).write_summary_csv(one);
  cfg.workers = 3;
  run_benchmark(cfg).write_summary_csv(many);
  CHECK(one.str() == many.str());
}

TEST_CASE("empty benchmark") {
  BenchmarkConfig cfg;
  cfg.replicates = 0;
  const ScoreTable table = run_benchmark(cfg);
  CHECK(table.rows.empty());
  cfg.replicates = -1;
  CHECK_THROWS_AS(run_benchmark(cfg), ConfigError);
}

}  // TEST_SUITE
