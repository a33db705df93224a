#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparsegp/common.hpp"
#include "sparsegp/kernels.hpp"
#include "sparsegp/mcmc.hpp"
#include "sparsegp/predict.hpp"

namespace sparsegp::synth {

enum class ScenarioTag { S1, S2, S3, S4, D1 };

std::string to_string(ScenarioTag tag);
/// Accepts S1..S4 and D1 (case-insensitive). Throws ConfigError otherwise.
ScenarioTag parse_scenario(const std::string& text);

struct Scenario {
  ScenarioTag tag = ScenarioTag::S1;
  double lower = 0.0;
  double upper = 10.0;
  int n_train = 50;
  int n_test = 300;
  double tau2 = 0.1;
};

/// S1-S4 on [0, 10] with their generating noise variances; D1 on (0, 1).
Scenario make_scenario(ScenarioTag tag);

/// Generating covariance of S1-S4, written out directly (1-D inputs).
///   S1: Matern(nu = 2.5), sigma^2 = 1, rho = 0.5
///   S2: Wendland, sigma^2 = 1, r0 = 1.5
///   S3: sigma(x) sigma(x') Wendland(r0 = 0.75), sigma^2(x) = 0.05 (x-5)^4 + 0.001
///   S4: nonstationary Matern(nu = 2.5), sigma^2(x) = 0.2 ((x-10)/3)^4 + 0.1,
///       Sigma(x) = 0.06 (x/3)^3 + 0.03
/// Throws std::invalid_argument for D1, which has a deterministic truth.
double scenario_covariance(ScenarioTag tag, double x, double x2);

/// -1 on (0, 0.25] and (0.5, 0.75], +1 elsewhere on (0, 1).
double piecewise_ground_truth(double x);

struct SyntheticDraw {
  InputMatrix train_x;
  Vector train_truth;
  Vector train_z;
  InputMatrix test_x;
  Vector test_truth;
  std::uint64_t seed = 0;
};

/// Training inputs uniform on the domain, test inputs on the midpoint grid
/// lower + (k + 1/2)(upper - lower)/n_test. The truth is one joint draw over
/// train and test points; training observations add N(0, tau^2) noise.
SyntheticDraw generate_scenario_draw(const Scenario& scenario, std::uint64_t seed);

double rmse(const Vector& prediction, const Vector& truth);

/// CRPS of N(mu, sigma^2) at y; |y - mu| when sigma = 0.
double crps_gaussian(double mu, double sigma, double y);

/// Test-set CRPS: Gaussian CRPS per posterior draw, averaged over draws, then over points.
/// Rows index test points, columns index draws.
double mixture_crps(const Matrix& draw_means, const Matrix& draw_variances, const Vector& truth);

enum class ModelTag { M1, M3, M4 };

std::string to_string(ModelTag tag);
ModelTag parse_model(const std::string& text);

struct ModelSettings {
  int n1 = 4;
  int n2 = 4;
  double bump_shape = 1.0;
  kernels::Smoothness nu = kernels::Smoothness::FiveHalves;
  std::size_t spline_knots = 5;
};

/// Kernel layout for a model on a scenario's domain: M1 Matern core only,
/// M3 Matern core with the sparse factor, M4 nonstationary core (natural
/// spline basis) with the sparse factor.
kernels::KernelHyperparameters model_layout(ModelTag model, const Scenario& scenario, const ModelSettings& settings);

/// Priors scaled to the scenario domain of width w: D0 = w, Dr = 0.3 w,
/// length-scale bound w, centroid bounds equal to the domain.
bayes::PriorSpec scenario_priors(const Scenario& scenario);

struct FitOptions {
  bayes::McmcConfig mcmc{};
  std::size_t max_posterior_draws = 200;
};

struct FitResult {
  bayes::PosteriorSampleSet samples;
  bayes::PredictionResult prediction;
  double rmse = 0.0;
  double crps = 0.0;
};

/// Constant-mean fit of `layout` to the training part of `draw`, scored on the test grid.
FitResult fit_and_score(const kernels::KernelHyperparameters& layout, const bayes::PriorSpec& priors,
                        const SyntheticDraw& draw, const FitOptions& options);

struct ScoreRow {
  ScenarioTag scenario = ScenarioTag::S1;
  ModelTag model = ModelTag::M1;
  int replicate = 0;
  double rmse = 0.0;  ///< NaN for a failed fit
  double crps = 0.0;
  double rel_rmse = 0.0;  ///< relative to M1 on the same replicate (NaN if unavailable)
  double rel_crps = 0.0;
};

struct ScoreSummary {
  ScenarioTag scenario = ScenarioTag::S1;
  ModelTag model = ModelTag::M1;
  int count = 0;
  double mean_rmse = 0.0;
  double mean_crps = 0.0;
  double mean_rel_rmse = 0.0;
  double q05_rel_rmse = 0.0;
  double q95_rel_rmse = 0.0;
  double mean_rel_crps = 0.0;
  double q05_rel_crps = 0.0;
  double q95_rel_crps = 0.0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;

  std::vector<ScoreSummary> summarize() const;
  void write_raw_csv(std::ostream& out) const;
  void write_summary_csv(std::ostream& out) const;
};

struct BenchmarkConfig {
  std::vector<ScenarioTag> scenarios{ScenarioTag::S1, ScenarioTag::S2, ScenarioTag::S3, ScenarioTag::S4};
  std::vector<ModelTag> models{ModelTag::M1, ModelTag::M3, ModelTag::M4};
  int replicates = 20;
  std::size_t mcmc_iterations = 5000;
  std::uint64_t seed = 0;
  double burn_in_fraction = 0.8;
  std::size_t max_posterior_draws = 200;
  std::size_t workers = 1;
  ModelSettings settings{};
  /// Template for sampler settings; iterations, seed and burn-in are overridden.
  bayes::McmcConfig mcmc{};
};

/// Fits every model on every (scenario, replicate) draw. Replicates run on a
/// worker pool; results do not depend on the worker count.
ScoreTable run_benchmark(const BenchmarkConfig& config);

}  // namespace sparsegp::synth
