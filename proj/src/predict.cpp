#include "sparsegp/predict.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include "sparsegp/assembly.hpp"

namespace sparsegp::bayes {

namespace {

Vector prior_mean(const Matrix& design, const Vector& beta, Eigen::Index rows) {
  if (design.cols() == 0) return Vector::Zero(rows);
  return design * beta;
}

void check_query(const InputMatrix& query, const Matrix& query_design, Eigen::Index dim, Eigen::Index terms) {
  if (query.rows() > 0 && query.cols() != dim) throw DataError("query dimension does not match the training inputs");
  if (query_design.rows() != query.rows() || query_design.cols() != terms)
    throw DataError("query design must have one row per query point and one column per mean term");
}

}  // namespace

ConditionalMoments conditional_moments(const Dataset& data, const Vector& beta,
                                       const kernels::KernelHyperparameters& theta, const InputMatrix& query,
                                       const Matrix& query_design, bool full_covariance,
                                       const LikelihoodOptions& options) {
  check_query(query, query_design, data.dim(), data.mean_terms());
  const Eigen::Index m = query.rows();
  const kernels::KernelFeatures qf(theta, query);
  ConditionalMoments out;
  out.mean = prior_mean(query_design, beta, m);
  out.variance.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) out.variance(i) = qf.pair(i, i);
  if (full_covariance) out.covariance = linalg::dense_covariance(qf);
  if (data.size() == 0) return out;

  const PreparedCovariance cov(data, theta, options);
  const kernels::KernelFeatures df(theta, data.inputs);
  const Matrix k_qz = linalg::cross_covariance(qf, df);
  out.mean += k_qz * cov.solve(mean_residual(data, beta));

  if (cov.is_dense()) {
    const Matrix v = cov.half_solve(k_qz.transpose());
    out.variance -= v.colwise().squaredNorm().transpose();
    if (full_covariance) out.covariance.noalias() -= v.transpose() * v;
  } else {
    const Matrix s = cov.solve(Matrix(k_qz.transpose()));
    out.variance -= (k_qz.array() * s.transpose().array()).rowwise().sum().matrix();
    if (full_covariance) out.covariance.noalias() -= k_qz * s;
  }
  out.variance = out.variance.cwiseMax(0.0);
  return out;
}

PredictionResult predict_conditional(std::span<const PosteriorDraw> samples, const Dataset& data,
                                     const InputMatrix& query, const Matrix& query_design,
                                     const PredictionOptions& options) {
  if (samples.empty()) throw DataError("no retained posterior draws to predict from");
  check_query(query, query_design, data.dim(), data.mean_terms());

  std::vector<std::size_t> used;
  const std::size_t total = samples.size();
  if (options.max_posterior_draws > 0 && total > options.max_posterior_draws) {
    for (std::size_t k = 0; k < options.max_posterior_draws; ++k) used.push_back(k * total / options.max_posterior_draws);
  } else {
    for (std::size_t k = 0; k < total; ++k) used.push_back(k);
  }

  const Eigen::Index m = query.rows();
  PredictionResult result;
  result.query = query;
  result.draw_means.resize(m, static_cast<Eigen::Index>(used.size()));
  result.draw_variances.resize(m, static_cast<Eigen::Index>(used.size()));
  const int per = std::max(options.draws_per_sample, 0);
  result.draws.resize(m, static_cast<Eigen::Index>(used.size()) * per);

  Eigen::Index ok = 0;
  for (std::size_t k = 0; k < used.size(); ++k) {
    const auto& draw = samples[used[k]];
    try {
      const auto mom =
          conditional_moments(data, draw.beta, draw.theta, query, query_design, per > 0, options.likelihood);
      result.draw_means.col(ok) = mom.mean;
      result.draw_variances.col(ok) = mom.variance;
      if (per > 0) {
        const Matrix l = robust_cholesky(mom.covariance);
        Rng rng(derive_seed(options.seed, used[k]));
        for (int r = 0; r < per; ++r) {
          Vector o(m);
          for (Eigen::Index i = 0; i < m; ++i) o(i) = rng.normal();
          result.draws.col(ok * per + r) = mom.mean + l * o;
        }
      }
      ++ok;
    } catch (const NumericalError& e) {
      ++result.skipped;
      spdlog::warn("predict: skipping posterior draw at iteration {}: {}", draw.iteration, e.what());
    }
  }
  if (ok == 0) throw NumericalError("prediction failed for every posterior draw");
  result.draw_means.conservativeResize(m, ok);
  result.draw_variances.conservativeResize(m, ok);
  result.draws.conservativeResize(m, ok * per);

  const double s = static_cast<double>(ok);
  result.mean = result.draw_means.rowwise().sum() / s;
  const Vector within = result.draw_variances.rowwise().sum() / s;
  const Vector second = result.draw_means.array().square().rowwise().sum().matrix() / s;
  const Vector total_var = (within + second - result.mean.cwiseAbs2()).cwiseMax(0.0);
  result.sd = total_var.cwiseSqrt();
  return result;
}

Matrix robust_cholesky(const Matrix& a) {
  const Eigen::Index n = a.rows();
  if (n == 0) return Matrix(0, 0);
  const double dmax = a.diagonal().maxCoeff();
  if (!std::isfinite(dmax)) throw NumericalError("covariance has non-finite diagonal");
  if (dmax <= 0.0) {
    if (a.isZero(0.0)) return Matrix::Zero(n, n);
    throw NumericalError("covariance with non-positive diagonal is not positive semi-definite");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += rel * dmax;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) {
      spdlog::debug("robust_cholesky: jitter {:.1e} x max diagonal", rel);
      return llt.matrixL();
    }
  }
  throw NumericalError("Cholesky failed after jitter up to 1e-4 x max diagonal; hyperparameters are invalid");
}

Matrix predict_unconditional(const Vector& beta, const kernels::KernelHyperparameters& theta,
                             const InputMatrix& query, const Matrix& query_design, std::uint64_t seed, int count) {
  if (query_design.rows() != query.rows() || query_design.cols() != beta.size())
    throw DataError("query design must have one row per query point and one column per mean term");
  const Eigen::Index m = query.rows();
  const kernels::KernelFeatures qf(theta, query);
  const Matrix l = robust_cholesky(linalg::dense_covariance(qf));
  const Vector mean = prior_mean(query_design, beta, m);
  Rng rng(seed);
  Matrix out(m, std::max(count, 0));
  for (int c = 0; c < count; ++c) {
    Vector o(m);
    for (Eigen::Index i = 0; i < m; ++i) o(i) = rng.normal();
    out.col(c) = mean + l * o;
  }
  return out;
}

}  // namespace sparsegp::bayes
