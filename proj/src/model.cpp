#include "sparsegp/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace sparsegp::bayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log density of U(lo, hi) at v (open interval).
double log_uniform(double v, double lo, double hi) {
  if (!(v > lo && v < hi)) return kNegInf;
  return -std::log(hi - lo);
}

double log_normal(double v, double variance) {
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - 0.5 * v * v / variance;
}

}  // namespace

void Dataset::validate() const {
  if (z.size() != inputs.rows()) throw DataError("observation count does not match input rows");
  if (design.rows() != inputs.rows()) throw DataError("design rows do not match input rows");
  if (!inputs.allFinite()) throw DataError("non-finite input coordinate");
  if (!z.allFinite()) throw DataError("non-finite observation");
  if (!design.allFinite()) throw DataError("non-finite design entry");
  if (noise) {
    if (noise->size() != inputs.rows()) throw DataError("noise column length mismatch");
    for (Eigen::Index i = 0; i < noise->size(); ++i)
      if (!((*noise)(i) >= 0.0) || !std::isfinite((*noise)(i)))
        throw DataError("noise variances must be finite and non-negative (row " + std::to_string(i + 1) + ")");
  }
}

void PriorSpec::validate(std::size_t dim) const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(beta_variance) || !positive(s0_upper) || !positive(D0) || !positive(Dr) ||
      !positive(reg_variance_upper) || !positive(tau2_upper) || !positive(core_variance_upper) ||
      !positive(length_scale_upper))
    throw ConfigError("prior bounds must be positive and finite");
  if (coordinate_bounds.size() != dim)
    throw ConfigError("coordinate_bounds needs one (lower, upper) pair per input dimension");
  for (const auto& [lo, hi] : coordinate_bounds)
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ConfigError("coordinate bounds must satisfy lower < upper");
}

double log_prior(const Vector& beta, const kernels::KernelHyperparameters& theta, const PriorSpec& priors) {
  double lp = 0.0;
  for (Eigen::Index k = 0; k < beta.size(); ++k) lp += log_normal(beta(k), priors.beta_variance);

  if (const auto* m = std::get_if<kernels::StationaryMatern>(&theta.core)) {
    lp += log_uniform(m->variance, 0.0, priors.core_variance_upper);
    lp += log_uniform(m->length_scale, 0.0, priors.length_scale_upper);
  } else if (const auto* ns = std::get_if<kernels::ParametricNonstationary>(&theta.core)) {
    lp += log_uniform(std::exp(2.0 * ns->log_sigma0), 0.0, priors.core_variance_upper);
    lp += log_uniform(std::exp(0.5 * ns->log_Sigma0), 0.0, priors.length_scale_upper);
    lp += log_uniform(ns->reg_var_sigma, 0.0, priors.reg_variance_upper);
    lp += log_uniform(ns->reg_var_Sigma, 0.0, priors.reg_variance_upper);
    if (lp == kNegInf) return lp;
    for (double phi : ns->sigma_coeffs) lp += log_normal(phi, ns->reg_var_sigma);
    for (double phi : ns->Sigma_coeffs) lp += log_normal(phi, ns->reg_var_Sigma);
  }

  if (const auto* h = std::get_if<kernels::Homoskedastic>(&theta.noise))
    lp += log_uniform(h->tau2, 0.0, priors.tau2_upper);

  if (theta.sparse) {
    const auto& sp = *theta.sparse;
    lp += log_uniform(sp.scale, 0.0, priors.s0_upper);
    for (double r0 : sp.wendland_radius) lp += log_uniform(r0, 0.0, priors.D0);
    for (std::size_t b = 0; b < sp.bumps.size(); ++b) {
      const auto& bump = sp.bumps[b];
      lp += log_uniform(bump.radius, 0.0, priors.Dr);
      for (std::size_t k = 0; k < bump.centroid.size(); ++k) {
        const auto& [lo, hi] = priors.coordinate_bounds.at(k);
        lp += log_uniform(bump.centroid[k], lo, hi);
      }
      const double pi = sp.inclusion_probs[b];
      if (!(pi > 0.0 && pi < 1.0)) return kNegInf;
      if (bump.amplitude == 1.0)
        lp += std::log(pi);
      else if (bump.amplitude == 0.0)
        lp += std::log1p(-pi);
      else
        return kNegInf;
    }
  }
  return lp;
}

}  // namespace sparsegp::bayes
