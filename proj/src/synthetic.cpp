#include "sparsegp/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "sparsegp/parallel.hpp"
#include "sparsegp/random.hpp"

namespace sparsegp::synth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

double matern52(double t) {
  const double s = std::sqrt(5.0) * t;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double wendland(double dist, double r0) {
  const double t = dist / r0;
  if (t >= 1.0) return 0.0;
  return std::pow(1.0 - t, 8) * (35.0 * t * t * t + 25.0 * t * t + 8.0 * t + 1.0);
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Linear-interpolation sample quantile.
double quantile(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string to_string(ScenarioTag tag) {
  switch (tag) {
    case ScenarioTag::S1: return "S1";
    case ScenarioTag::S2: return "S2";
    case ScenarioTag::S3: return "S3";
    case ScenarioTag::S4: return "S4";
    case ScenarioTag::D1: return "D1";
  }
  return "?";
}

ScenarioTag parse_scenario(const std::string& text) {
  const auto t = upper(text);
  if (t == "S1") return ScenarioTag::S1;
  if (t == "S2") return ScenarioTag::S2;
  if (t == "S3") return ScenarioTag::S3;
  if (t == "S4") return ScenarioTag::S4;
  if (t == "D1") return ScenarioTag::D1;
  throw ConfigError("unknown scenario tag '" + text + "' (expected S1, S2, S3, S4 or D1)");
}

Scenario make_scenario(ScenarioTag tag) {
  Scenario s;
  s.tag = tag;
  switch (tag) {
    case ScenarioTag::S1:
    case ScenarioTag::S2: s.tau2 = 0.1; break;
    case ScenarioTag::S3: s.tau2 = 0.475; break;
    case ScenarioTag::S4: s.tau2 = 0.506; break;
    case ScenarioTag::D1:
      s.lower = 0.0;
      s.upper = 1.0;
      s.tau2 = 0.1;
      break;
  }
  return s;
}

double scenario_covariance(ScenarioTag tag, double x, double x2) {
  const double d = std::abs(x - x2);
  switch (tag) {
    case ScenarioTag::S1:
      return matern52(d / 0.5);
    case ScenarioTag::S2:
      return wendland(d, 1.5);
    case ScenarioTag::S3: {
      auto var = [](double u) { return 0.05 * std::pow(u - 5.0, 4) + 0.001; };
      return std::sqrt(var(x) * var(x2)) * wendland(d, 0.75);
    }
    case ScenarioTag::S4: {
      auto var = [](double u) { return 0.2 * std::pow((u - 10.0) / 3.0, 4) + 0.1; };
      auto len = [](double u) { return 0.06 * std::pow(u / 3.0, 3) + 0.03; };
      const double sa = len(x);
      const double sb = len(x2);
      const double avg = 0.5 * (sa + sb);
      return std::sqrt(var(x) * var(x2)) * std::pow(sa * sb, 0.25) / std::sqrt(avg) * matern52(std::sqrt(d * d / avg));
    }
    case ScenarioTag::D1:
      break;
  }
  throw std::invalid_argument("scenario D1 has a deterministic truth and no covariance");
}

double piecewise_ground_truth(double x) {
  if (x <= 0.25) return -1.0;
  if (x <= 0.5) return 1.0;
  if (x <= 0.75) return -1.0;
  return 1.0;
}

SyntheticDraw generate_scenario_draw(const Scenario& scenario, std::uint64_t seed) {
  if (scenario.n_train < 0 || scenario.n_test < 0 || !(scenario.upper > scenario.lower) || !(scenario.tau2 >= 0.0))
    throw ConfigError("invalid scenario settings");
  const Eigen::Index n = scenario.n_train;
  const Eigen::Index m = scenario.n_test;
  const double width = scenario.upper - scenario.lower;

  SyntheticDraw draw;
  draw.seed = seed;
  Rng rng(seed);
  draw.train_x.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) draw.train_x(i, 0) = scenario.lower + width * rng.uniform();
  draw.test_x.resize(m, 1);
  for (Eigen::Index k = 0; k < m; ++k)
    draw.test_x(k, 0) = scenario.lower + width * (static_cast<double>(k) + 0.5) / static_cast<double>(m);

  Vector truth(n + m);
  if (scenario.tag == ScenarioTag::D1) {
    for (Eigen::Index i = 0; i < n; ++i) truth(i) = piecewise_ground_truth(draw.train_x(i, 0));
    for (Eigen::Index k = 0; k < m; ++k) truth(n + k) = piecewise_ground_truth(draw.test_x(k, 0));
  } else {
    Vector pts(n + m);
    pts << draw.train_x.col(0), draw.test_x.col(0);
    Matrix cov(n + m, n + m);
    for (Eigen::Index j = 0; j < n + m; ++j)
      for (Eigen::Index i = j; i < n + m; ++i) cov(i, j) = cov(j, i) = scenario_covariance(scenario.tag, pts(i), pts(j));
    Matrix l;
    try {
      l = bayes::robust_cholesky(cov);
    } catch (const NumericalError& e) {
      throw NumericalError("scenario " + to_string(scenario.tag) + " covariance factorization failed: " + e.what());
    }
    Vector o(n + m);
    for (Eigen::Index i = 0; i < n + m; ++i) o(i) = rng.normal();
    truth = l * o;
  }
  draw.train_truth = truth.head(n);
  draw.test_truth = truth.tail(m);
  draw.train_z = draw.train_truth;
  const double tau = std::sqrt(scenario.tau2);
  for (Eigen::Index i = 0; i < n; ++i) draw.train_z(i) += tau * rng.normal();
  return draw;
}

double rmse(const Vector& prediction, const Vector& truth) {
  if (prediction.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
  if (prediction.size() == 0) return 0.0;
  return std::sqrt((prediction - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double crps_gaussian(double mu, double sigma, double y) {
  if (sigma < 0.0) throw std::invalid_argument("crps_gaussian: negative sigma");
  if (sigma == 0.0) return std::abs(y - mu);
  const double w = (y - mu) / sigma;
  const double cdf = 0.5 * std::erfc(-w / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * w * w) / std::sqrt(2.0 * std::numbers::pi);
  return sigma * (w * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

double mixture_crps(const Matrix& draw_means, const Matrix& draw_variances, const Vector& truth) {
  if (draw_means.rows() != truth.size() || draw_variances.rows() != truth.size() ||
      draw_means.cols() != draw_variances.cols() || draw_means.cols() == 0)
    throw std::invalid_argument("mixture_crps: shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    double point = 0.0;
    for (Eigen::Index s = 0; s < draw_means.cols(); ++s)
      point += crps_gaussian(draw_means(i, s), std::sqrt(std::max(draw_variances(i, s), 0.0)), truth(i));
    total += point / static_cast<double>(draw_means.cols());
  }
  return truth.size() == 0 ? 0.0 : total / static_cast<double>(truth.size());
}

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::M1: return "M1";
    case ModelTag::M3: return "M3";
    case ModelTag::M4: return "M4";
  }
  return "?";
}

ModelTag parse_model(const std::string& text) {
  const auto t = upper(text);
  if (t == "M1") return ModelTag::M1;
  if (t == "M3") return ModelTag::M3;
  if (t == "M4") return ModelTag::M4;
  throw ConfigError("unknown model tag '" + text + "' (expected M1, M3 or M4)");
}

kernels::KernelHyperparameters model_layout(ModelTag model, const Scenario& scenario, const ModelSettings& settings) {
  kernels::KernelHyperparameters theta;
  if (model == ModelTag::M4) {
    kernels::ParametricNonstationary ns;
    ns.nu = settings.nu;
    ns.basis = kernels::natural_spline_basis(0, scenario.lower, scenario.upper, settings.spline_knots);
    ns.sigma_coeffs.assign(ns.basis.size(), 0.0);
    ns.Sigma_coeffs.assign(ns.basis.size(), 0.0);
    theta.core = ns;
  } else {
    kernels::StationaryMatern m;
    m.nu = settings.nu;
    theta.core = m;
  }
  theta.noise = kernels::Homoskedastic{0.1};
  if (model != ModelTag::M1) {
    kernels::SparseKernelParams sp;
    sp.n1 = settings.n1;
    sp.n2 = settings.n2;
    sp.wendland_radius = {1.0};
    const auto count = static_cast<std::size_t>(sp.bump_count());
    sp.bumps.assign(count, kernels::BumpFunction{{0.5 * (scenario.lower + scenario.upper)}, 1.0, settings.bump_shape, 1.0});
    sp.inclusion_probs.assign(count, 0.5);
    theta.sparse = sp;
  }
  return theta;
}

bayes::PriorSpec scenario_priors(const Scenario& scenario) {
  bayes::PriorSpec p;
  const double width = scenario.upper - scenario.lower;
  p.D0 = width;
  p.Dr = 0.3 * width;
  p.length_scale_upper = width;
  // Spline columns have unit standard deviation, so this bounds log-scale
  // swings to a few units per column.
  p.reg_variance_upper = 10.0;
  p.coordinate_bounds = {{scenario.lower, scenario.upper}};
  return p;
}

FitResult fit_and_score(const kernels::KernelHyperparameters& layout, const bayes::PriorSpec& priors,
                        const SyntheticDraw& draw, const FitOptions& options) {
  bayes::Dataset data;
  data.inputs = draw.train_x;
  data.z = draw.train_z;
  data.design = Matrix::Ones(draw.train_x.rows(), 1);
  const auto start = bayes::default_initial_state(data, priors, layout, derive_seed(options.mcmc.seed, 1));

  FitResult fit;
  fit.samples = bayes::mcmc_run(data, priors, start, options.mcmc);
  bayes::PredictionOptions popts;
  popts.max_posterior_draws = options.max_posterior_draws;
  popts.likelihood = options.mcmc.likelihood;
  const Matrix test_design = Matrix::Ones(draw.test_x.rows(), 1);
  fit.prediction = bayes::predict_conditional(fit.samples.retained(), data, draw.test_x, test_design, popts);
  fit.rmse = rmse(fit.prediction.mean, draw.test_truth);
  fit.crps = mixture_crps(fit.prediction.draw_means, fit.prediction.draw_variances, draw.test_truth);
  return fit;
}

std::vector<ScoreSummary> ScoreTable::summarize() const {
  std::vector<ScoreSummary> out;
  for (const auto& row : rows) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const ScoreSummary& s) {
      return s.scenario == row.scenario && s.model == row.model;
    });
    if (seen) continue;
    ScoreSummary s;
    s.scenario = row.scenario;
    s.model = row.model;
    std::vector<double> r, c, rr, rc;
    for (const auto& x : rows) {
      if (x.scenario != row.scenario || x.model != row.model || std::isnan(x.rmse)) continue;
      r.push_back(x.rmse);
      c.push_back(x.crps);
      if (!std::isnan(x.rel_rmse)) rr.push_back(x.rel_rmse);
      if (!std::isnan(x.rel_crps)) rc.push_back(x.rel_crps);
    }
    s.count = static_cast<int>(r.size());
    s.mean_rmse = mean_of(r);
    s.mean_crps = mean_of(c);
    s.mean_rel_rmse = mean_of(rr);
    s.q05_rel_rmse = quantile(rr, 0.05);
    s.q95_rel_rmse = quantile(rr, 0.95);
    s.mean_rel_crps = mean_of(rc);
    s.q05_rel_crps = quantile(rc, 0.05);
    s.q95_rel_crps = quantile(rc, 0.95);
    out.push_back(s);
  }
  return out;
}

void ScoreTable::write_raw_csv(std::ostream& out) const {
  out << "scenario,model,replicate,rmse,crps,rel_rmse,rel_crps\n";
  for (const auto& r : rows)
    out << to_string(r.scenario) << ',' << to_string(r.model) << ',' << r.replicate << ',' << fmt_double(r.rmse) << ','
        << fmt_double(r.crps) << ',' << fmt_double(r.rel_rmse) << ',' << fmt_double(r.rel_crps) << '\n';
}

void ScoreTable::write_summary_csv(std::ostream& out) const {
  out << "scenario,model,count,mean_rmse,mean_crps,mean_rel_rmse,q05_rel_rmse,q95_rel_rmse,mean_rel_crps,"
         "q05_rel_crps,q95_rel_crps\n";
  for (const auto& s : summarize())
    out << to_string(s.scenario) << ',' << to_string(s.model) << ',' << s.count << ',' << fmt_double(s.mean_rmse)
        << ',' << fmt_double(s.mean_crps) << ',' << fmt_double(s.mean_rel_rmse) << ',' << fmt_double(s.q05_rel_rmse)
        << ',' << fmt_double(s.q95_rel_rmse) << ',' << fmt_double(s.mean_rel_crps) << ','
        << fmt_double(s.q05_rel_crps) << ',' << fmt_double(s.q95_rel_crps) << '\n';
}

ScoreTable run_benchmark(const BenchmarkConfig& config) {
  if (config.replicates < 0) throw ConfigError("benchmark replicates must be non-negative");
  const std::size_t n_scen = config.scenarios.size();
  const std::size_t n_rep = static_cast<std::size_t>(config.replicates);
  const std::size_t n_mod = config.models.size();
  std::vector<ScoreRow> cells(n_scen * n_rep * n_mod);

  parallel_for(n_scen * n_rep, config.workers, [&](std::size_t job) {
    const std::size_t si = job / n_rep;
    const std::size_t rep = job % n_rep;
    const auto tag = config.scenarios[si];
    const auto scenario = make_scenario(tag);
    const auto tag_id = static_cast<std::uint64_t>(tag);
    const auto draw = generate_scenario_draw(scenario, derive_seed(config.seed, tag_id, rep));
    const auto priors = scenario_priors(scenario);
    for (std::size_t mi = 0; mi < n_mod; ++mi) {
      auto& cell = cells[job * n_mod + mi];
      cell.scenario = tag;
      cell.model = config.models[mi];
      cell.replicate = static_cast<int>(rep);
      FitOptions options;
      options.mcmc = config.mcmc;
      options.mcmc.iterations = config.mcmc_iterations;
      options.mcmc.burn_in_fraction = config.burn_in_fraction;
      options.mcmc.seed = derive_seed(config.seed, tag_id, rep, 100 + static_cast<std::uint64_t>(cell.model));
      options.mcmc.likelihood.plan.worker_count = 1;
      options.max_posterior_draws = config.max_posterior_draws;
      try {
        const auto fit = fit_and_score(model_layout(cell.model, scenario, config.settings), priors, draw, options);
        cell.rmse = fit.rmse;
        cell.crps = fit.crps;
      } catch (const std::exception& e) {
        spdlog::warn("benchmark: {} {} replicate {} failed: {}", to_string(tag), to_string(cell.model), rep, e.what());
        cell.rmse = kNaN;
        cell.crps = kNaN;
      }
      spdlog::debug("benchmark: {} {} replicate {} rmse={:.4f} crps={:.4f}", to_string(tag), to_string(cell.model),
                    rep, cell.rmse, cell.crps);
    }
  });

  for (std::size_t job = 0; job < n_scen * n_rep; ++job) {
    const ScoreRow* ref = nullptr;
    for (std::size_t mi = 0; mi < n_mod; ++mi)
      if (cells[job * n_mod + mi].model == ModelTag::M1) ref = &cells[job * n_mod + mi];
    for (std::size_t mi = 0; mi < n_mod; ++mi) {
      auto& cell = cells[job * n_mod + mi];
      if (ref == &cell) {
        cell.rel_rmse = std::isnan(cell.rmse) ? kNaN : 1.0;
        cell.rel_crps = std::isnan(cell.crps) ? kNaN : 1.0;
      } else if (ref) {
        cell.rel_rmse = cell.rmse / ref->rmse;
        cell.rel_crps = cell.crps / ref->crps;
      } else {
        cell.rel_rmse = kNaN;
        cell.rel_crps = kNaN;
      }
    }
  }
  // Rows ordered scenario, model, replicate.
  ScoreTable table;
  for (std::size_t si = 0; si < n_scen; ++si)
    for (std::size_t mi = 0; mi < n_mod; ++mi)
      for (std::size_t rep = 0; rep < n_rep; ++rep) table.rows.push_back(cells[(si * n_rep + rep) * n_mod + mi]);
  return table;
}

}  // namespace sparsegp::synth
