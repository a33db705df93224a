#include "sparsegp/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sparsegp/random.hpp"

namespace sparsegp::linalg {

namespace {

using Operator = std::function<void(const Vector&, Vector&)>;

// Gauss quadrature estimate of q^T log(M) q for a unit vector q.
double lanczos_quadrature(const Operator& apply, const Vector& q, Index max_steps, Matrix& basis, Vector& w) {
  basis.col(0) = q;
  std::vector<double> alpha;
  std::vector<double> beta;
  double scale = 0.0;
  for (Index j = 0; j < max_steps; ++j) {
    apply(basis.col(j), w);
    const double a_j = basis.col(j).dot(w);
    alpha.push_back(a_j);
    scale = std::max(scale, std::abs(a_j));
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      const Vector coeffs = basis.leftCols(j + 1).transpose() * w;
      w.noalias() -= basis.leftCols(j + 1) * coeffs;
    }
    const double b_j = w.norm();
    if (j + 1 == max_steps || b_j <= 1e-12 * scale) break;
    beta.push_back(b_j);
    basis.col(j + 1) = w / b_j;
  }

  const auto k = static_cast<Index>(alpha.size());
  Vector diag = Eigen::Map<const Vector>(alpha.data(), k);
  Vector sub = Eigen::Map<const Vector>(beta.data(), k - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> tri;
  tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (tri.info() != Eigen::Success) throw NumericalError("lanczos_logdet: tridiagonal eigensolve failed");
  const Vector& ritz = tri.eigenvalues();
  double quad = 0.0;
  for (Index m = 0; m < k; ++m) {
    if (!(ritz(m) > 0.0)) {
      std::ostringstream msg;
      msg << "lanczos_logdet: non-positive Ritz value " << ritz(m)
          << "; matrix is indefinite or numerically singular, increase the nugget (tau^2)";
      throw NumericalError(msg.str());
    }
    const double u0 = tri.eigenvectors()(0, m);
    quad += u0 * u0 * std::log(ritz(m));
  }
  return quad;
}

// Lower-triangular factor in CSR form, diagonal stored last in each row.
struct LowerFactor {
  std::vector<Index> offsets;
  std::vector<Index> cols;
  std::vector<double> values;

  // y <- L^{-1} y
  void forward(Vector& y) const {
    const auto n = static_cast<Index>(offsets.size()) - 1;
    for (Index i = 0; i < n; ++i) {
      double v = y(i);
      const Index last = offsets[i + 1] - 1;
      for (Index p = offsets[i]; p < last; ++p) v -= values[p] * y(cols[p]);
      y(i) = v / values[last];
    }
  }
  // y <- L^{-T} y
  void backward(Vector& y) const {
    const auto n = static_cast<Index>(offsets.size()) - 1;
    for (Index i = n - 1; i >= 0; --i) {
      const Index last = offsets[i + 1] - 1;
      y(i) /= values[last];
      for (Index p = offsets[i]; p < last; ++p) y(cols[p]) -= values[p] * y(i);
    }
  }
};

// Zero-fill incomplete Cholesky of A + shift * diag(A). Returns false on a
// non-positive pivot.
bool incomplete_cholesky(const SparseSymmetricMatrix& a, double shift, LowerFactor& l) {
  const Index n = a.dim();
  const auto& ro = a.row_offsets();
  const auto& ci = a.col_indices();
  const auto& va = a.values();
  l.offsets.assign(1, 0);
  l.cols.clear();
  l.values.clear();
  for (Index i = 0; i < n; ++i) {
    bool has_diag = false;
    for (Index p = ro[i]; p < ro[i + 1] && ci[p] <= i; ++p) {
      if (ci[p] == i) has_diag = true;
      l.cols.push_back(ci[p]);
      l.values.push_back(va[p]);
    }
    if (!has_diag) return false;
    l.offsets.push_back(static_cast<Index>(l.cols.size()));
  }
  for (Index i = 0; i < n; ++i) {
    const Index begin = l.offsets[i];
    const Index last = l.offsets[i + 1] - 1;
    for (Index p = begin; p <= last; ++p) {
      const Index j = l.cols[p];
      // Dot product of row i and row j over columns < j.
      double dot = 0.0;
      Index q = l.offsets[j];
      const Index q_end = l.offsets[j + 1] - 1;
      for (Index r = begin; r < p && q < q_end;) {
        if (l.cols[r] == l.cols[q]) {
          dot += l.values[r] * l.values[q];
          ++r;
          ++q;
        } else if (l.cols[r] < l.cols[q]) {
          ++r;
        } else {
          ++q;
        }
      }
      if (p < last) {
        l.values[p] = (l.values[p] - dot) / l.values[q_end];
      } else {
        const double pivot = l.values[p] * (1.0 + shift) - dot;
        if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
        l.values[p] = std::sqrt(pivot);
      }
    }
  }
  return true;
}

}  // namespace

double lanczos_logdet(const SparseSymmetricMatrix& a, const LanczosOptions& options) {
  const Index n = a.dim();
  if (n == 0) return 0.0;
  if (options.probes <= 0 || options.steps <= 0)
    throw std::invalid_argument("lanczos_logdet: probes and steps must be positive");
  const Index max_steps = std::min<Index>(options.steps, n);

  double base = 0.0;
  Operator apply = [&a](const Vector& x, Vector& y) { a.multiply(x, y); };
  LowerFactor factor;
  Vector scratch(n);
  if (options.precondition) {
    double shift = 0.0;
    while (!incomplete_cholesky(a, shift, factor)) {
      shift = shift == 0.0 ? 1e-3 : 2.0 * shift;
      if (shift > 1e3) throw NumericalError("lanczos_logdet: incomplete Cholesky failed; matrix is not positive definite");
    }
    for (Index i = 0; i < n; ++i) base += 2.0 * std::log(factor.values[factor.offsets[i + 1] - 1]);
    apply = [&](const Vector& x, Vector& y) {
      scratch = x;
      factor.backward(scratch);
      a.multiply(scratch, y);
      factor.forward(y);
    };
  }

  Rng rng(options.seed);
  Matrix basis(n, max_steps);
  Vector w(n);
  double total = 0.0;
  for (int p = 0; p < options.probes; ++p) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.rademacher();
    const double v_norm2 = v.squaredNorm();
    total += v_norm2 * lanczos_quadrature(apply, v / std::sqrt(v_norm2), max_steps, basis, w);
  }
  return base + total / options.probes;
}

MinresResult minres_solve(const SparseSymmetricMatrix& a, const Vector& rhs, double tol, Index max_iters) {
  const Index n = a.dim();
  if (rhs.size() != n) throw std::invalid_argument("minres_solve: rhs length mismatch");
  if (max_iters <= 0) max_iters = 10 * std::max<Index>(n, 1);

  MinresResult result{Vector::Zero(n), {}};
  const double beta1 = rhs.norm();
  if (beta1 == 0.0) {
    result.report.converged = true;
    return result;
  }

  const double eps = std::numeric_limits<double>::epsilon();
  Vector& x = result.solution;
  Vector r1 = rhs;
  Vector r2 = rhs;
  Vector y = rhs;
  Vector v(n), w = Vector::Zero(n), w1(n), w2 = Vector::Zero(n);
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0;
  double phibar = beta1, cs = -1.0, sn = 0.0;

  auto true_residual = [&] { return (rhs - a * x).norm() / beta1; };

  Index itn = 0;
  while (itn < max_iters) {
    ++itn;
    v = y / beta;
    a.multiply(v, y);
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    oldb = beta;
    beta = y.norm();

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), eps);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;

    if (phibar <= tol * beta1 || beta == 0.0) {
      const double res = true_residual();
      if (res <= tol) {
        result.report = {itn, res, true};
        return result;
      }
      if (beta == 0.0) break;
    }
  }
  const double res = true_residual();
  result.report = {itn, res, res <= tol};
  return result;
}

DenseLogdetSolve dense_logdet_solve(const SparseSymmetricMatrix& a, const Vector& rhs, Index dense_threshold) {
  if (a.dim() > dense_threshold)
    throw std::invalid_argument("dense_logdet_solve: N = " + std::to_string(a.dim()) +
                                " exceeds the dense threshold " + std::to_string(dense_threshold));
  if (rhs.size() != a.dim()) throw std::invalid_argument("dense_logdet_solve: rhs length mismatch");
  const Eigen::LLT<Matrix> llt(a.to_dense());
  if (llt.info() != Eigen::Success)
    throw NumericalError("dense Cholesky failed: matrix is not positive definite; increase the nugget (tau^2)");
  const auto diag = llt.matrixLLT().diagonal();
  double logdet = 0.0;
  for (Index i = 0; i < diag.size(); ++i) logdet += std::log(diag(i));
  return {2.0 * logdet, llt.solve(rhs)};
}

}  // namespace sparsegp::linalg
