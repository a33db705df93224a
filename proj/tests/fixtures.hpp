// Shared test fixtures: random hyperparameters drawn from the priors and small datasets.
#pragma once

#include <random>

#include "sparsegp/kernels.hpp"
#include "sparsegp/model.hpp"

namespace fixtures {

using namespace sparsegp;

inline InputMatrix uniform_inputs(std::mt19937_64& gen, int n, int d, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  InputMatrix x(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) x(i, k) = u(gen);
  return x;
}

/// Hyperparameters drawn from the priors on [0, 1]^d: Matern core (nu = 2.5),
/// sparse factor with n1 x n2 unit-shape bumps, homoskedastic noise.
inline kernels::KernelHyperparameters prior_draw(std::mt19937_64& gen, int d, const bayes::PriorSpec& p, int n1 = 4,
                                                 int n2 = 4, double tau2 = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  kernels::KernelHyperparameters theta;
  theta.core = kernels::StationaryMatern{p.core_variance_upper * u(gen), p.length_scale_upper * u(gen),
                                         kernels::Smoothness::FiveHalves};
  kernels::SparseKernelParams sp;
  sp.scale = p.s0_upper * u(gen);
  sp.wendland_radius = {p.D0 * u(gen)};
  sp.n1 = n1;
  sp.n2 = n2;
  for (int k = 0; k < n1 * n2; ++k) {
    kernels::BumpFunction b;
    for (int c = 0; c < d; ++c) b.centroid.push_back(u(gen));
    b.radius = p.Dr * u(gen);
    const double pi = u(gen);
    b.amplitude = u(gen) < pi ? 1.0 : 0.0;
    sp.bumps.push_back(b);
    sp.inclusion_probs.push_back(pi);
  }
  theta.sparse = sp;
  theta.noise = kernels::Homoskedastic{tau2};
  return theta;
}

inline bayes::PriorSpec unit_priors(int d) {
  bayes::PriorSpec p;
  p.D0 = 0.5;
  p.Dr = 0.3;
  p.length_scale_upper = 1.0;
  p.core_variance_upper = 10.0;
  p.tau2_upper = 1.0;
  for (int k = 0; k < d; ++k) p.coordinate_bounds.emplace_back(0.0, 1.0);
  return p;
}

}  // namespace fixtures
