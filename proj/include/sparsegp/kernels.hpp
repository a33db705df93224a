#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "sparsegp/common.hpp"

namespace sparsegp::kernels {

// ---------------------------------------------------------------------------
// Sparse (sparsity-discovering) kernel
// ---------------------------------------------------------------------------

/// Smooth compactly supported bump a * exp{b [1 - (1 - |x-h|^2/r^2)^-1]} on |x-h| < r.
struct BumpFunction {
  std::vector<double> centroid;
  double amplitude = 1.0;
  double shape = 1.0;
  double radius = 1.0;
};

double bump_eval(const BumpFunction& bump, Point x);

/// Hyperparameters of C_sparse = s0 f0(x, x'; r0) + sum_i f_i(x) f_i(x').
///
/// Bumps and inclusion probabilities are stored row-major over the n1 x n2
/// grid: entry (i, j) lives at i * n2 + j. `wendland_radius` has one entry for
/// the isotropic Wendland factor or d entries for the per-coordinate variant.
struct SparseKernelParams {
  double scale = 1.0;
  std::vector<double> wendland_radius{1.0};
  int n1 = 0;
  int n2 = 0;
  std::vector<BumpFunction> bumps;
  std::vector<double> inclusion_probs;

  BumpFunction& bump(int i, int j) { return bumps[static_cast<std::size_t>(i * n2 + j)]; }
  const BumpFunction& bump(int i, int j) const {
    return bumps[static_cast<std::size_t>(i * n2 + j)];
  }
  int bump_count() const { return n1 * n2; }
  bool anisotropic() const { return wendland_radius.size() > 1; }

  /// 2 + n1 n2 (d + 3) for the isotropic Wendland factor.
  std::size_t hyperparameter_count(std::size_t dim) const;

  /// Throws ConfigError when shapes, radii, or grid sizes are inconsistent.
  void validate(std::size_t dim) const;
};

/// f_i(x) = sum_j g_ij(x) for a zero-based component index i.
double sparse_component_eval(const SparseKernelParams& params, int i, Point x);

/// Wendland polynomial (1-t)^8 (35t^3 + 25t^2 + 8t + 1) on t < 1, zero beyond.
double wendland_polynomial(double t);
double wendland_eval(double r0, Point x, Point x2);
double wendland_eval(std::span<const double> r0, Point x, Point x2);

double sparse_kernel_eval(const SparseKernelParams& params, Point x, Point x2);

// ---------------------------------------------------------------------------
// Core kernels
// ---------------------------------------------------------------------------

enum class Smoothness { Half, ThreeHalves, FiveHalves };

Smoothness smoothness_from_value(double nu);
double smoothness_value(Smoothness nu);

/// Closed-form Matern correlation at scaled distance t >= 0.
double matern_correlation(Smoothness nu, double t);

/// Natural cubic spline column over one coordinate, rescaled to [0, 1] by
/// (lower, upper). Knots are given in the rescaled units. Index 0 is the
/// linear term; index m >= 1 is d_m - d_{K-1} in the truncated-power form.
/// The evaluated column is (raw - offset) / scale.
struct NaturalSplineBasis {
  std::size_t coordinate = 0;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<double> knots;
  std::size_t index = 0;
  double offset = 0.0;
  double scale = 1.0;
};

/// Gaussian bump exp(-|x - c|^2 / (2 w^2)).
struct RadialBasis {
  std::vector<double> center;
  double width = 1.0;
};

using BasisFunction = std::variant<NaturalSplineBasis, RadialBasis>;

double basis_eval(const BasisFunction& basis, Point x);

/// All K-1 non-intercept natural-spline columns for `knot_count` equally
/// spaced knots over [lower, upper].
std::vector<BasisFunction> natural_spline_basis(std::size_t coordinate, double lower, double upper,
                                                std::size_t knot_count);

struct StationaryMatern {
  double variance = 1.0;
  double length_scale = 1.0;
  Smoothness nu = Smoothness::ThreeHalves;
};

/// Locally isotropic nonstationary Matern whose standard deviation sigma(x)
/// and length-scale matrix Sigma(x) are log-linear in a shared basis.
struct ParametricNonstationary {
  double log_sigma0 = 0.0;
  double log_Sigma0 = 0.0;
  std::vector<double> sigma_coeffs;
  std::vector<double> Sigma_coeffs;
  std::vector<BasisFunction> basis;
  double reg_var_sigma = 1.0;
  double reg_var_Sigma = 1.0;
  Smoothness nu = Smoothness::ThreeHalves;

  double log_sigma(Point x) const;
  double log_Sigma(Point x) const;
};

struct ConstantCore {};

using CoreKernelParams = std::variant<StationaryMatern, ParametricNonstationary, ConstantCore>;

double core_eval(const CoreKernelParams& params, Point x, Point x2);

// ---------------------------------------------------------------------------
// Noise and the full hyperparameter vector
// ---------------------------------------------------------------------------

struct Homoskedastic {
  double tau2 = 0.0;
};

struct Heteroskedastic {
  std::vector<double> tau2_per_point;
};

using NoiseParams = std::variant<Homoskedastic, Heteroskedastic>;

double noise_variance(const NoiseParams& noise, std::size_t i);

/// theta = (theta_core, theta_sparse, theta_z). An empty `sparse` means the
/// sparse factor is identically 1, i.e. a plain core-kernel GP.
struct KernelHyperparameters {
  CoreKernelParams core = StationaryMatern{};
  std::optional<SparseKernelParams> sparse;
  NoiseParams noise = Homoskedastic{};
};

/// C_y(x, x') = C_core(x, x') * C_sparse(x, x').
double y_kernel_eval(const KernelHyperparameters& theta, Point x, Point x2);

/// C_z between observed points i and j: C_y plus tau^2(x_i) on the diagonal.
double z_kernel_eval(const KernelHyperparameters& theta, std::size_t i, std::size_t j,
                     const InputMatrix& inputs);

/// Per-point quantities (sigma(x), Sigma(x), f_i(x)) cached for a point set so
/// that pairwise evaluation costs one combine step. Values are bit-identical to
/// y_kernel_eval because both go through the same combine routine.
class KernelFeatures {
 public:
  KernelFeatures(const KernelHyperparameters& theta, const InputMatrix& inputs);

  Eigen::Index size() const { return inputs_->rows(); }
  const KernelHyperparameters& theta() const { return *theta_; }
  const InputMatrix& inputs() const { return *inputs_; }

  /// C_y between point i of `a` and point j of `b` (same theta required).
  static double pair(const KernelFeatures& a, Eigen::Index i, const KernelFeatures& b,
                     Eigen::Index j);
  double pair(Eigen::Index i, Eigen::Index j) const { return pair(*this, i, *this, j); }

  /// C_sparse only, used for normalized kernel export.
  double sparse_pair(Eigen::Index i, Eigen::Index j) const;

 private:
  const KernelHyperparameters* theta_;
  const InputMatrix* inputs_;
  std::vector<double> sigma_;
  std::vector<double> Sigma_;
  std::vector<double> components_;  // N x n1, row-major
  int n1_ = 0;
};

}  // namespace sparsegp::kernels
