#include "sparsegp/likelihood.hpp"

#include <cmath>
#include <numbers>

namespace sparsegp::bayes {

PreparedCovariance::PreparedCovariance(const Dataset& data, const kernels::KernelHyperparameters& theta,
                                       const LikelihoodOptions& options)
    : minres_tol_(options.minres_tol), minres_max_iters_(options.minres_max_iters) {
  auto guarded = linalg::apply_conditioning_guard(
      linalg::assemble_covariance(data.inputs, theta, options.plan, /*include_noise=*/true));
  matrix_ = std::move(guarded.matrix);
  jitter_ = guarded.jitter;
  const auto n = matrix_.dim();
  if (n == 0) return;

  const bool dense = options.method == LikelihoodMethod::Dense ||
                     (options.method == LikelihoodMethod::Automatic && n <= options.dense_threshold);
  if (dense) {
    llt_.emplace(matrix_.to_dense());
    if (llt_->info() != Eigen::Success)
      throw NumericalError("dense Cholesky of C_z failed; increase the nugget (tau^2)");
    const auto diag = llt_->matrixLLT().diagonal();
    double half = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) half += std::log(diag(i));
    logdet_ = 2.0 * half;
  } else {
    logdet_ = linalg::lanczos_logdet(matrix_, options.lanczos);
  }
}

Vector PreparedCovariance::solve(const Vector& rhs) const {
  if (llt_) return llt_->solve(rhs);
  auto result = linalg::minres_solve(matrix_, rhs, minres_tol_, minres_max_iters_);
  if (!result.report.converged)
    throw NumericalError("MINRES did not converge (relative residual " +
                         std::to_string(result.report.final_residual_norm) + ")");
  return std::move(result.solution);
}

Matrix PreparedCovariance::solve(const Matrix& rhs) const {
  if (llt_) return llt_->solve(rhs);
  Matrix out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve(Vector(rhs.col(c)));
  return out;
}

Matrix PreparedCovariance::half_solve(const Matrix& rhs) const {
  if (!llt_) throw std::logic_error("half_solve requires the dense path");
  return llt_->matrixL().solve(rhs);
}

double PreparedCovariance::log_density(const Vector& residual) const {
  const auto n = static_cast<double>(matrix_.dim());
  if (matrix_.dim() == 0) return 0.0;
  double quad = 0.0;
  if (llt_) {
    quad = llt_->matrixL().solve(residual).squaredNorm();
  } else {
    quad = residual.dot(solve(residual));
  }
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * logdet_ - 0.5 * quad;
}

Vector mean_residual(const Dataset& data, const Vector& beta) {
  if (data.design.cols() == 0) return data.z;
  return data.z - data.design * beta;
}

double log_marginal_likelihood(const Dataset& data, const Vector& beta,
                               const kernels::KernelHyperparameters& theta, const LikelihoodOptions& options) {
  if (data.size() == 0) return 0.0;
  const PreparedCovariance cov(data, theta, options);
  return cov.log_density(mean_residual(data, beta));
}

}  // namespace sparsegp::bayes
