#pragma once

#include <cstdint>

#include "sparsegp/common.hpp"
#include "sparsegp/sparse_matrix.hpp"

namespace sparsegp::linalg {

struct SolverReport {
  Index iterations = 0;
  /// ||A x - b|| / ||b||, recomputed from the returned iterate.
  double final_residual_norm = 0.0;
  bool converged = false;
};

struct LanczosOptions {
  int probes = 30;
  int steps = 50;
  std::uint64_t seed = 0;
  /// Run the quadrature on L^{-1} A L^{-T}, L the zero-fill incomplete
  /// Cholesky factor, and add 2 sum log L_ii.
  bool precondition = true;
};

/// Stochastic Lanczos quadrature estimate of log det(A) for SPD A.
///
/// Each Rademacher probe v starts a Lanczos run (full reorthogonalization) from
/// v / |v|; the Ritz values theta_k and first eigenvector components u_k of the
/// tridiagonal matrix give v^T log(A) v ~ |v|^2 sum_k u_k^2 log(theta_k). The
/// probe average is returned. With preconditioning the same estimator is applied
/// to L^{-1} A L^{-T}, whose spectrum clusters near 1. Throws NumericalError on a
/// non-positive Ritz value or when the incomplete factorization cannot be formed.
double lanczos_logdet(const SparseSymmetricMatrix& a, const LanczosOptions& options);

struct MinresResult {
  Vector solution;
  SolverReport report;
};

/// Unpreconditioned MINRES for symmetric A. Stops once ||A x - b|| <= tol ||b||;
/// on hitting max_iters the best iterate comes back with converged = false.
MinresResult minres_solve(const SparseSymmetricMatrix& a, const Vector& rhs, double tol = 1e-8,
                          Index max_iters = 0);

struct DenseLogdetSolve {
  double logdet = 0.0;
  Vector solution;
};

constexpr Index kDefaultDenseThreshold = 5000;

/// Exact log det(A) and A^{-1} rhs through a dense Cholesky factorization.
/// Throws NumericalError if A is not numerically SPD, std::invalid_argument if
/// N exceeds `dense_threshold`.
DenseLogdetSolve dense_logdet_solve(const SparseSymmetricMatrix& a, const Vector& rhs,
                                    Index dense_threshold = kDefaultDenseThreshold);

}  // namespace sparsegp::linalg
