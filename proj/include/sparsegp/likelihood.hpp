#pragma once

#include <optional>

#include <Eigen/Cholesky>

#include "sparsegp/assembly.hpp"
#include "sparsegp/model.hpp"
#include "sparsegp/solvers.hpp"

namespace sparsegp::bayes {

enum class LikelihoodMethod {
  Dense,      ///< Cholesky of the expanded matrix
  Iterative,  ///< Lanczos log-determinant + MINRES quadratic form
  Automatic,  ///< Dense when N <= dense_threshold
};

struct LikelihoodOptions {
  LikelihoodMethod method = LikelihoodMethod::Automatic;
  linalg::Index dense_threshold = linalg::kDefaultDenseThreshold;
  linalg::LanczosOptions lanczos{};
  double minres_tol = 1e-8;
  linalg::Index minres_max_iters = 0;  // 0: 10 N
  linalg::AssemblyPlan plan{};
};

/// C_z for one theta, assembled and made ready for log-determinant and solves.
class PreparedCovariance {
 public:
  PreparedCovariance(const Dataset& data, const kernels::KernelHyperparameters& theta,
                     const LikelihoodOptions& options);

  double logdet() const { return logdet_; }
  bool is_dense() const { return llt_.has_value(); }
  const linalg::SparseSymmetricMatrix& matrix() const { return matrix_; }
  double jitter() const { return jitter_; }

  /// C_z^{-1} rhs. Throws NumericalError when MINRES does not converge.
  Vector solve(const Vector& rhs) const;
  /// Column-wise solve; dense path only uses one factorization.
  Matrix solve(const Matrix& rhs) const;
  /// L^{-1} rhs for the dense Cholesky factor L (dense path only).
  Matrix half_solve(const Matrix& rhs) const;

  /// -N/2 log(2 pi) - logdet/2 - r^T C_z^{-1} r / 2.
  double log_density(const Vector& residual) const;

 private:
  linalg::SparseSymmetricMatrix matrix_;
  std::optional<Eigen::LLT<Matrix>> llt_;
  double logdet_ = 0.0;
  double jitter_ = 0.0;
  double minres_tol_ = 1e-8;
  linalg::Index minres_max_iters_ = 0;
};

/// Residual z - W beta.
Vector mean_residual(const Dataset& data, const Vector& beta);

/// log N(z; W beta, C_z(theta)). Returns 0 for an empty dataset.
double log_marginal_likelihood(const Dataset& data, const Vector& beta,
                               const kernels::KernelHyperparameters& theta,
                               const LikelihoodOptions& options = {});

}  // namespace sparsegp::bayes
