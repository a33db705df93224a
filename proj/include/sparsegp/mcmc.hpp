#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sparsegp/common.hpp"
#include "sparsegp/kernels.hpp"
#include "sparsegp/likelihood.hpp"
#include "sparsegp/model.hpp"
#include "sparsegp/random.hpp"

namespace sparsegp::bayes {

/// Running mean and sample covariance (Welford).
class EmpiricalCovariance {
 public:
  explicit EmpiricalCovariance(Eigen::Index dim = 0);

  void add(const Vector& x);
  std::size_t count() const { return count_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  /// Unbiased sample covariance; zero until two states have been added.
  Matrix covariance() const;

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Matrix m2_;
};

/// (2.38^2 / d) Cov + eps I with eps = max(1e-6 trace(Cov) / d, 1e-12).
/// Returns `previous` when fewer than two states were seen or the result is
/// not a valid covariance.
Matrix adaptive_proposal_update(const EmpiricalCovariance& history, const Matrix& previous);

/// Draw from Beta(1 + a, 2 - a) for a in {0, 1}, clamped into (0, 1).
double gibbs_pi_update(int a, Rng& rng);

struct BlockToggles {
  bool beta = true;
  bool kernel = true;     ///< core, noise, s0, r0
  bool bumps = true;      ///< centroids and radii
  bool amplitudes = true;
  bool inclusion = true;  ///< Gibbs update of pi
};

struct McmcConfig {
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  double burn_in_fraction = 0.8;
  std::size_t thin = 1;
  /// Iterations of fixed isotropic proposals before adaptation starts.
  std::size_t warmup = 200;
  std::size_t adaptation_interval = 50;
  /// Proposal standard deviation per transformed coordinate during warmup.
  double initial_scale = 0.1;
  bool adapt = true;
  /// Replaces the likelihood by a constant (sampler diagnostics).
  bool flat_likelihood = false;
  /// Recompute the likelihood after every iteration and compare with the cache.
  bool check_cache = false;
  BlockToggles blocks{};
  LikelihoodOptions likelihood{};
};

/// Adaptation state of one random-walk block (transformed coordinates).
struct BlockAdaptation {
  EmpiricalCovariance history;
  Matrix proposal;  ///< proposal covariance before scaling
  double log_scale = 0.0;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  std::size_t window_accepted = 0;
  std::size_t window_proposed = 0;
  std::size_t adaptations = 0;

  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
  }
};

struct ChainStart {
  Vector beta;
  kernels::KernelHyperparameters theta;
};

struct PosteriorDraw {
  std::size_t iteration = 0;
  Vector beta;
  kernels::KernelHyperparameters theta;
  double log_likelihood = 0.0;
  double log_prior = 0.0;

  double log_posterior() const { return log_likelihood + log_prior; }
};

struct PosteriorSampleSet {
  /// Stored draws in chain order; the first is the initial state.
  std::vector<PosteriorDraw> draws;
  /// Number of leading draws that belong to burn-in.
  std::size_t burn_in = 0;
  /// Final acceptance rates of the random-walk blocks (beta, kernel, bumps)
  /// and of the joint amplitude proposal.
  std::vector<double> acceptance;

  std::span<const PosteriorDraw> retained() const {
    return std::span<const PosteriorDraw>(draws).subspan(burn_in);
  }
};

/// Initial state: beta by least squares, core variance and noise from the
/// residual variance, length scales at prior midpoints, r0 = D0 / 2,
/// radii = Dr / 2, centroids on a seeded Latin hypercube, amplitudes 1, pi 0.5.
/// `layout` fixes the model structure (core family, basis, n1 x n2, shapes,
/// noise mode); its numeric values are overwritten.
ChainStart default_initial_state(const Dataset& data, const PriorSpec& priors,
                                 const kernels::KernelHyperparameters& layout, std::uint64_t seed);

/// Adaptive block Metropolis-Hastings. Each iteration runs, in order, the
/// beta block, the kernel block (core, noise, s0, r0), the bump block
/// (centroids, radii), the joint amplitude proposal and the Gibbs update of pi.
/// Likelihood failures reject the proposal. Throws ConfigError if the initial
/// state has zero prior density.
PosteriorSampleSet mcmc_run(const Dataset& data, const PriorSpec& priors, const ChainStart& init,
                            const McmcConfig& config);

}  // namespace sparsegp::bayes
