#pragma once

#include <cstdint>
#include <span>

#include "sparsegp/common.hpp"
#include "sparsegp/likelihood.hpp"
#include "sparsegp/mcmc.hpp"

namespace sparsegp::bayes {

struct PredictionOptions {
  /// Conditional draws of y stored per posterior draw (0: none).
  int draws_per_sample = 0;
  std::uint64_t seed = 0;
  /// Use at most this many posterior draws, evenly spaced (0: all).
  std::size_t max_posterior_draws = 0;
  LikelihoodOptions likelihood{};
};

struct PredictionResult {
  InputMatrix query;
  Vector mean;
  Vector sd;
  /// M x K stored draws of y (K may be 0).
  Matrix draws;
  /// M x S conditional means and variances, one column per posterior draw used.
  Matrix draw_means;
  Matrix draw_variances;
  std::size_t skipped = 0;
};

/// Conditional mean and covariance for a single (beta, theta):
///   m = W_P beta + C_yz C_z^{-1} (z - W beta),  C = C_y - C_yz C_z^{-1} C_zy.
struct ConditionalMoments {
  Vector mean;
  Vector variance;
  Matrix covariance;  ///< filled only when requested
};

ConditionalMoments conditional_moments(const Dataset& data, const Vector& beta,
                                       const kernels::KernelHyperparameters& theta, const InputMatrix& query,
                                       const Matrix& query_design, bool full_covariance,
                                       const LikelihoodOptions& options = {});

/// Monte-Carlo mixture of the conditional predictive over posterior draws.
/// The reported variance is the mean within-draw variance plus the spread of
/// the draw means. Draws whose solves fail are skipped and counted.
PredictionResult predict_conditional(std::span<const PosteriorDraw> samples, const Dataset& data,
                                     const InputMatrix& query, const Matrix& query_design,
                                     const PredictionOptions& options = {});

/// Lower Cholesky factor of a PSD matrix, adding escalating diagonal jitter
/// (1e-10 to 1e-4 of the largest diagonal) until the factorization succeeds.
/// The zero matrix yields a zero factor. Throws NumericalError otherwise.
Matrix robust_cholesky(const Matrix& a);

/// `count` draws of y* = W_P beta + L o with L L^T = C_y at the query points.
/// Returns an M x count matrix.
Matrix predict_unconditional(const Vector& beta, const kernels::KernelHyperparameters& theta,
                             const InputMatrix& query, const Matrix& query_design, std::uint64_t seed,
                             int count = 1);

}  // namespace sparsegp::bayes
