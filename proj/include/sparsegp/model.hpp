#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sparsegp/common.hpp"
#include "sparsegp/kernels.hpp"

namespace sparsegp::bayes {

/// Observations z at inputs X with prior-mean design W (N x p, p may be 0).
struct Dataset {
  InputMatrix inputs;
  Vector z;
  Matrix design;
  /// Known per-point noise variances; when present the model is heteroskedastic.
  std::optional<Vector> noise;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  Eigen::Index mean_terms() const { return design.cols(); }

  /// Throws DataError on non-finite values or misaligned rows.
  void validate() const;
};

/// Upper bounds of the uniform priors plus the Gaussian prior variance k of beta.
/// Every uniform prior is on the open interval (0, upper) except centroids,
/// which are uniform on (l_k, u_k) per coordinate.
struct PriorSpec {
  double beta_variance = 100.0 * 100.0;
  double s0_upper = 1e5;
  double D0 = 1.0;
  double Dr = 1.0;
  std::vector<std::pair<double, double>> coordinate_bounds;
  double reg_variance_upper = 1e5;
  double tau2_upper = 10.0;
  /// sigma^2 of a Matern core, sigma0^2 of a nonstationary core.
  double core_variance_upper = 100.0;
  /// rho of a Matern core, sqrt(Sigma0) of a nonstationary core.
  double length_scale_upper = 10.0;

  void validate(std::size_t dim) const;
};

/// Sum of prior log densities; -infinity outside the support.
///
///   beta ~ N(0, k I); s0 ~ U(0, s0_upper); r0 ~ U(0, D0); r_ij ~ U(0, Dr);
///   h_ij^k ~ U(l_k, u_k); a_ij ~ Bernoulli(pi_ij); pi_ij ~ U(0, 1);
///   tau^2 ~ U(0, tau2_upper) (homoskedastic only);
///   Matern core: sigma^2 ~ U(0, V), rho ~ U(0, L);
///   nonstationary core: sigma0^2 ~ U(0, V), sqrt(Sigma0) ~ U(0, L),
///   phi ~ N(0, v) per coefficient, v ~ U(0, reg_variance_upper).
/// Bump shapes are fixed and carry no prior term.
double log_prior(const Vector& beta, const kernels::KernelHyperparameters& theta, const PriorSpec& priors);

}  // namespace sparsegp::bayes
