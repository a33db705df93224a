#include "sparsegp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <spdlog/spdlog.h>

namespace sparsegp::bayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class BlockId { Beta = 0, Kernel = 1, Bumps = 2 };
constexpr int kRandomWalkBlocks = 3;

// One scalar of the chain state as seen by a random-walk block.
struct Coord {
  enum class Map { Identity, Logit, LogitOfExp };
  double* value = nullptr;
  Map map = Map::Identity;
  double lo = 0.0;
  double hi = 0.0;
  double exp_factor = 1.0;  // LogitOfExp: q = exp(exp_factor * value) is logit-mapped
};

double log_sigmoid(double u) { return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u)); }

double to_unconstrained(const Coord& c) {
  double x = *c.value;
  switch (c.map) {
    case Coord::Map::Identity:
      return x;
    case Coord::Map::LogitOfExp:
      x = std::exp(c.exp_factor * x);
      [[fallthrough]];
    case Coord::Map::Logit:
      return std::log(x - c.lo) - std::log(c.hi - x);
  }
  return x;
}

void from_unconstrained(const Coord& c, double u) {
  if (c.map == Coord::Map::Identity) {
    *c.value = u;
    return;
  }
  const double x = c.lo + (c.hi - c.lo) * std::exp(log_sigmoid(u));
  *c.value = c.map == Coord::Map::Logit ? x : std::log(x) / c.exp_factor;
}

// log |dx/du| of the logit map.
double log_jacobian(const Coord& c, double u) {
  if (c.map == Coord::Map::Identity) return 0.0;
  return std::log(c.hi - c.lo) + log_sigmoid(u) + log_sigmoid(-u);
}

std::vector<Coord> collect_coords(BlockId block, Vector& beta, kernels::KernelHyperparameters& theta,
                                  const PriorSpec& priors) {
  std::vector<Coord> coords;
  auto logit = [&](double& v, double lo, double hi) {
    coords.push_back({&v, Coord::Map::Logit, lo, hi, 1.0});
  };
  switch (block) {
    case BlockId::Beta:
      for (Eigen::Index k = 0; k < beta.size(); ++k) coords.push_back({&beta(k)});
      break;
    case BlockId::Kernel:
      if (auto* m = std::get_if<kernels::StationaryMatern>(&theta.core)) {
        logit(m->variance, 0.0, priors.core_variance_upper);
        logit(m->length_scale, 0.0, priors.length_scale_upper);
      } else if (auto* ns = std::get_if<kernels::ParametricNonstationary>(&theta.core)) {
        coords.push_back({&ns->log_sigma0, Coord::Map::LogitOfExp, 0.0, priors.core_variance_upper, 2.0});
        coords.push_back({&ns->log_Sigma0, Coord::Map::LogitOfExp, 0.0, priors.length_scale_upper, 0.5});
        logit(ns->reg_var_sigma, 0.0, priors.reg_variance_upper);
        logit(ns->reg_var_Sigma, 0.0, priors.reg_variance_upper);
        for (double& phi : ns->sigma_coeffs) coords.push_back({&phi});
        for (double& phi : ns->Sigma_coeffs) coords.push_back({&phi});
      }
      if (auto* h = std::get_if<kernels::Homoskedastic>(&theta.noise)) logit(h->tau2, 0.0, priors.tau2_upper);
      if (theta.sparse) {
        logit(theta.sparse->scale, 0.0, priors.s0_upper);
        for (double& r0 : theta.sparse->wendland_radius) logit(r0, 0.0, priors.D0);
      }
      break;
    case BlockId::Bumps:
      if (theta.sparse) {
        for (auto& bump : theta.sparse->bumps) {
          for (std::size_t k = 0; k < bump.centroid.size(); ++k) {
            const auto& [lo, hi] = priors.coordinate_bounds.at(k);
            logit(bump.centroid[k], lo, hi);
          }
          logit(bump.radius, 0.0, priors.Dr);
        }
      }
      break;
  }
  return coords;
}

Vector pack(const std::vector<Coord>& coords) {
  Vector u(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t k = 0; k < coords.size(); ++k) u(static_cast<Eigen::Index>(k)) = to_unconstrained(coords[k]);
  return u;
}

void unpack(const std::vector<Coord>& coords, const Vector& u) {
  for (std::size_t k = 0; k < coords.size(); ++k) from_unconstrained(coords[k], u(static_cast<Eigen::Index>(k)));
}

double total_log_jacobian(const std::vector<Coord>& coords, const Vector& u) {
  double lj = 0.0;
  for (std::size_t k = 0; k < coords.size(); ++k) lj += log_jacobian(coords[k], u(static_cast<Eigen::Index>(k)));
  return lj;
}

struct Evaluation {
  double log_likelihood = 0.0;
  std::optional<PreparedCovariance> covariance;
};

class ChainState {
 public:
  ChainState(const Dataset& data, const McmcConfig& config) : data_(data), config_(config) {}

  // Likelihood of (beta, theta); nullopt when the evaluation fails numerically.
  std::optional<Evaluation> evaluate(const Vector& beta, const kernels::KernelHyperparameters& theta) const {
    Evaluation ev;
    if (config_.flat_likelihood || data_.size() == 0) return ev;
    try {
      ev.covariance.emplace(data_, theta, config_.likelihood);
      ev.log_likelihood = ev.covariance->log_density(mean_residual(data_, beta));
    } catch (const NumericalError& e) {
      spdlog::debug("mcmc: proposal rejected after likelihood failure: {}", e.what());
      return std::nullopt;
    }
    if (!std::isfinite(ev.log_likelihood)) return std::nullopt;
    return ev;
  }

  // Likelihood for a new beta with theta unchanged; reuses the factorization.
  std::optional<double> evaluate_beta(const Vector& beta) const {
    if (config_.flat_likelihood || data_.size() == 0) return 0.0;
    try {
      const double ll = current.covariance->log_density(mean_residual(data_, beta));
      if (!std::isfinite(ll)) return std::nullopt;
      return ll;
    } catch (const NumericalError& e) {
      spdlog::debug("mcmc: beta proposal rejected after solver failure: {}", e.what());
      return std::nullopt;
    }
  }

  Vector beta;
  kernels::KernelHyperparameters theta;
  double log_prior = 0.0;
  Evaluation current;

 private:
  const Dataset& data_;
  const McmcConfig& config_;
};

double target_acceptance(Eigen::Index dim) { return dim <= 1 ? 0.44 : 0.234; }

}  // namespace

EmpiricalCovariance::EmpiricalCovariance(Eigen::Index dim) : mean_(Vector::Zero(dim)), m2_(Matrix::Zero(dim, dim)) {}

void EmpiricalCovariance::add(const Vector& x) {
  ++count_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_.noalias() += delta * (x - mean_).transpose();
}

Matrix EmpiricalCovariance::covariance() const {
  if (count_ < 2) return Matrix::Zero(dim(), dim());
  Matrix cov = m2_ / static_cast<double>(count_ - 1);
  return 0.5 * (cov + cov.transpose());
}

Matrix adaptive_proposal_update(const EmpiricalCovariance& history, const Matrix& previous) {
  if (history.count() < 2 || history.dim() == 0) return previous;
  const Matrix cov = history.covariance();
  if (!cov.allFinite()) return previous;
  const auto d = static_cast<double>(history.dim());
  const double eps = std::max(1e-6 * cov.trace() / d, 1e-12);
  Matrix proposal = (2.38 * 2.38 / d) * cov;
  proposal.diagonal().array() += eps;
  const Eigen::LLT<Matrix> llt(proposal);
  if (llt.info() != Eigen::Success) return previous;
  return proposal;
}

double gibbs_pi_update(int a, Rng& rng) {
  const double u = rng.uniform();
  // Beta(2,1) has CDF p^2; Beta(1,2) has CDF 1 - (1-p)^2.
  double p = a == 1 ? std::sqrt(u) : 1.0 - std::sqrt(1.0 - u);
  const double tiny = std::numeric_limits<double>::min();
  return std::clamp(p, tiny, std::nextafter(1.0, 0.0));
}

ChainStart default_initial_state(const Dataset& data, const PriorSpec& priors,
                                 const kernels::KernelHyperparameters& layout, std::uint64_t seed) {
  priors.validate(static_cast<std::size_t>(data.dim()));
  ChainStart start{Vector::Zero(data.mean_terms()), layout};

  double s2 = 1.0;
  if (data.size() > 0) {
    Vector residual = data.z;
    if (data.mean_terms() > 0) {
      start.beta = data.design.colPivHouseholderQr().solve(data.z);
      residual = data.z - data.design * start.beta;
    }
    s2 = residual.squaredNorm() / static_cast<double>(data.size());
    if (!(s2 > 0.0) || !std::isfinite(s2)) s2 = 1.0;
  }
  const double variance = std::min(0.9 * s2, 0.5 * priors.core_variance_upper);
  const double length = 0.5 * priors.length_scale_upper;

  auto& theta = start.theta;
  if (auto* m = std::get_if<kernels::StationaryMatern>(&theta.core)) {
    m->variance = variance;
    m->length_scale = length;
  } else if (auto* ns = std::get_if<kernels::ParametricNonstationary>(&theta.core)) {
    ns->log_sigma0 = 0.5 * std::log(variance);
    ns->log_Sigma0 = 2.0 * std::log(length);
    ns->sigma_coeffs.assign(ns->basis.size(), 0.0);
    ns->Sigma_coeffs.assign(ns->basis.size(), 0.0);
    ns->reg_var_sigma = 0.5 * priors.reg_variance_upper;
    ns->reg_var_Sigma = 0.5 * priors.reg_variance_upper;
  }
  if (auto* h = std::get_if<kernels::Homoskedastic>(&theta.noise))
    h->tau2 = std::min(0.1 * s2, 0.5 * priors.tau2_upper);

  if (theta.sparse) {
    auto& sp = *theta.sparse;
    sp.scale = std::min(1.0, 0.5 * priors.s0_upper);
    for (double& r0 : sp.wendland_radius) r0 = 0.5 * priors.D0;
    const auto count = static_cast<std::size_t>(sp.bump_count());
    sp.bumps.resize(count);
    sp.inclusion_probs.assign(count, 0.5);
    const auto dim = static_cast<std::size_t>(data.dim());
    Rng rng(derive_seed(seed, 0x6c6873u));
    for (auto& bump : sp.bumps) {
      bump.centroid.assign(dim, 0.0);
      bump.radius = 0.5 * priors.Dr;
      bump.amplitude = 1.0;
    }
    // Latin hypercube: one stratum per bump in every coordinate.
    std::vector<std::size_t> perm(count);
    for (std::size_t k = 0; k < dim; ++k) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = count; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
      }
      const auto& [lo, hi] = priors.coordinate_bounds[k];
      for (std::size_t b = 0; b < count; ++b)
        sp.bumps[b].centroid[k] =
            lo + (hi - lo) * (static_cast<double>(perm[b]) + rng.uniform()) / static_cast<double>(count);
    }
  }
  return start;
}

PosteriorSampleSet mcmc_run(const Dataset& data, const PriorSpec& priors, const ChainStart& init,
                            const McmcConfig& config) {
  data.validate();
  priors.validate(static_cast<std::size_t>(data.dim()));
  if (init.beta.size() != data.mean_terms()) throw ConfigError("initial beta length does not match the design");
  if (config.thin == 0) throw ConfigError("mcmc thin must be positive");
  if (config.adaptation_interval == 0) throw ConfigError("mcmc adaptation_interval must be positive");
  if (!(config.initial_scale > 0.0)) throw ConfigError("mcmc initial_scale must be positive");
  if (!(config.burn_in_fraction >= 0.0 && config.burn_in_fraction < 1.0))
    throw ConfigError("mcmc burn_in_fraction must lie in [0, 1)");

  Rng rng(derive_seed(config.seed, 0x6d636d63u));
  ChainState state(data, config);
  state.beta = init.beta;
  state.theta = init.theta;
  state.log_prior = log_prior(state.beta, state.theta, priors);
  if (state.log_prior == kNegInf) throw ConfigError("initial state lies outside the prior support");
  {
    auto ev = state.evaluate(state.beta, state.theta);
    if (!ev) throw NumericalError("likelihood evaluation failed at the initial state");
    state.current = std::move(*ev);
  }

  const BlockToggles& on = config.blocks;
  const bool sparse = state.theta.sparse.has_value();
  const bool block_enabled[kRandomWalkBlocks] = {on.beta && data.mean_terms() > 0, on.kernel, on.bumps && sparse};

  std::vector<BlockAdaptation> blocks(kRandomWalkBlocks);
  for (int b = 0; b < kRandomWalkBlocks; ++b) {
    const auto coords = collect_coords(static_cast<BlockId>(b), state.beta, state.theta, priors);
    const auto d = static_cast<Eigen::Index>(coords.size());
    blocks[b].history = EmpiricalCovariance(d);
    blocks[b].proposal = config.initial_scale * config.initial_scale * Matrix::Identity(d, d);
  }
  std::vector<Matrix> chol(kRandomWalkBlocks);
  for (int b = 0; b < kRandomWalkBlocks; ++b) chol[b] = blocks[b].proposal.llt().matrixL();
  std::size_t amp_accepted = 0;
  std::size_t amp_proposed = 0;

  PosteriorSampleSet out;
  auto store = [&](std::size_t iteration) {
    out.draws.push_back({iteration, state.beta, state.theta, state.current.log_likelihood, state.log_prior});
  };
  store(0);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    // Random-walk blocks on transformed coordinates.
    for (int b = 0; b < kRandomWalkBlocks; ++b) {
      if (!block_enabled[b]) continue;
      auto& block = blocks[b];
      const auto id = static_cast<BlockId>(b);
      const auto coords = collect_coords(id, state.beta, state.theta, priors);
      if (coords.empty()) continue;
      const Vector u = pack(coords);
      Vector xi(u.size());
      for (Eigen::Index k = 0; k < xi.size(); ++k) xi(k) = rng.normal();
      const Vector u_new = u + std::exp(block.log_scale) * (chol[b] * xi);
      const double log_u = std::log(rng.uniform());

      Vector beta_new = state.beta;
      auto theta_new = state.theta;
      const auto coords_new = collect_coords(id, beta_new, theta_new, priors);
      unpack(coords_new, u_new);

      ++block.proposed;
      ++block.window_proposed;
      const double lp_new = log_prior(beta_new, theta_new, priors);
      if (lp_new == kNegInf || !std::isfinite(lp_new)) continue;

      std::optional<Evaluation> ev;
      if (id == BlockId::Beta) {
        const auto ll = state.evaluate_beta(beta_new);
        if (!ll) continue;
        ev.emplace();
        ev->log_likelihood = *ll;
      } else {
        ev = state.evaluate(beta_new, theta_new);
        if (!ev) continue;
      }
      const double log_ratio = (ev->log_likelihood + lp_new + total_log_jacobian(coords, u_new)) -
                               (state.current.log_likelihood + state.log_prior + total_log_jacobian(coords, u));
      if (log_u < log_ratio) {
        state.beta = std::move(beta_new);
        state.theta = std::move(theta_new);
        state.log_prior = lp_new;
        if (id == BlockId::Beta)
          state.current.log_likelihood = ev->log_likelihood;
        else
          state.current = std::move(*ev);
        ++block.accepted;
        ++block.window_accepted;
      }
    }

    // Joint amplitude proposal from Bernoulli(pi); the MH ratio reduces to the likelihood ratio.
    if (sparse && on.amplitudes) {
      auto theta_new = state.theta;
      auto& sp = *theta_new.sparse;
      bool changed = false;
      for (std::size_t k = 0; k < sp.bumps.size(); ++k) {
        const double a = rng.bernoulli(sp.inclusion_probs[k]) ? 1.0 : 0.0;
        changed = changed || a != sp.bumps[k].amplitude;
        sp.bumps[k].amplitude = a;
      }
      const double log_u = std::log(rng.uniform());
      ++amp_proposed;
      if (!changed) {
        ++amp_accepted;
      } else if (auto ev = state.evaluate(state.beta, theta_new);
                 ev && log_u < ev->log_likelihood - state.current.log_likelihood) {
        state.theta = std::move(theta_new);
        state.current = std::move(*ev);
        state.log_prior = log_prior(state.beta, state.theta, priors);
        ++amp_accepted;
      }
    }

    // Conjugate Gibbs step for the inclusion probabilities.
    if (sparse && on.inclusion) {
      auto& sp = *state.theta.sparse;
      for (std::size_t k = 0; k < sp.bumps.size(); ++k)
        sp.inclusion_probs[k] = gibbs_pi_update(sp.bumps[k].amplitude == 1.0 ? 1 : 0, rng);
      state.log_prior = log_prior(state.beta, state.theta, priors);
    }

    // Adaptation.
    for (int b = 0; b < kRandomWalkBlocks; ++b) {
      if (!block_enabled[b]) continue;
      auto& block = blocks[b];
      const auto coords = collect_coords(static_cast<BlockId>(b), state.beta, state.theta, priors);
      block.history.add(pack(coords));
      if (!config.adapt || it <= config.warmup || (it - config.warmup) % config.adaptation_interval != 0) continue;
      const auto d = block.history.dim();
      ++block.adaptations;
      const double gamma = std::pow(static_cast<double>(block.adaptations), -0.8);
      const double rate = block.window_proposed == 0 ? 0.0
                                                     : static_cast<double>(block.window_accepted) /
                                                           static_cast<double>(block.window_proposed);
      block.log_scale += gamma * (rate - target_acceptance(d));
      block.window_accepted = 0;
      block.window_proposed = 0;
      if (block.accepted >= static_cast<std::size_t>(std::max<Eigen::Index>(2 * d, 10))) {
        block.proposal = adaptive_proposal_update(block.history, block.proposal);
        chol[b] = block.proposal.llt().matrixL();
      }
    }

    if (config.check_cache && !config.flat_likelihood) {
      const double fresh = log_marginal_likelihood(data, state.beta, state.theta, config.likelihood);
      if (std::abs(fresh - state.current.log_likelihood) > 1e-8 * std::max(1.0, std::abs(fresh)))
        throw std::logic_error("mcmc: cached log-likelihood diverged from recomputation");
    }

    if (it % config.thin == 0) store(it);
  }

  if (config.iterations > 0) {
    const auto cutoff = static_cast<std::size_t>(std::floor(config.burn_in_fraction * static_cast<double>(config.iterations)));
    out.burn_in = static_cast<std::size_t>(
        std::count_if(out.draws.begin(), out.draws.end(), [&](const PosteriorDraw& d) { return d.iteration <= cutoff; }));
  }
  for (int b = 0; b < kRandomWalkBlocks; ++b) out.acceptance.push_back(blocks[b].acceptance_rate());
  out.acceptance.push_back(amp_proposed == 0 ? 0.0
                                             : static_cast<double>(amp_accepted) / static_cast<double>(amp_proposed));
  spdlog::info("mcmc: {} iterations, acceptance beta={:.3f} kernel={:.3f} bumps={:.3f} amplitudes={:.3f}",
               config.iterations, out.acceptance[0], out.acceptance[1], out.acceptance[2], out.acceptance[3]);
  return out;
}

}  // namespace sparsegp::bayes
