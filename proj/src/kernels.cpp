#include "sparsegp/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sparsegp::kernels {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kSqrt5 = 2.2360679774997896964;

double squared_distance(Point a, Point b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

double wendland_scaled_distance(std::span<const double> r0, Point x, Point x2) {
  if (r0.size() == 1) return std::sqrt(squared_distance(x, x2)) / r0[0];
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = (x[k] - x2[k]) / r0[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

// Per-point core quantities. Only the nonstationary core has any.
void core_point(const CoreKernelParams& core, Point x, double& sigma, double& Sigma) {
  if (const auto* ns = std::get_if<ParametricNonstationary>(&core)) {
    sigma = std::exp(ns->log_sigma(x));
    Sigma = std::exp(ns->log_Sigma(x));
  } else {
    sigma = 1.0;
    Sigma = 1.0;
  }
}

double core_combine(const CoreKernelParams& core, double dist2, std::size_t dim, double sigma_a,
                    double Sigma_a, double sigma_b, double Sigma_b) {
  switch (core.index()) {
    case 0: {
      const auto& m = std::get<StationaryMatern>(core);
      return m.variance * matern_correlation(m.nu, std::sqrt(dist2) / m.length_scale);
    }
    case 1: {
      const auto& ns = std::get<ParametricNonstationary>(core);
      const double d = static_cast<double>(dim);
      const double mean_Sigma = 0.5 * (Sigma_a + Sigma_b);
      const double prefactor =
          sigma_a * sigma_b * std::pow(Sigma_a * Sigma_b, 0.25 * d) / std::pow(mean_Sigma, 0.5 * d);
      return prefactor * matern_correlation(ns.nu, std::sqrt(dist2 / mean_Sigma));
    }
    default:
      return 1.0;
  }
}

void sparse_point(const SparseKernelParams& sp, Point x, double* out) {
  for (int i = 0; i < sp.n1; ++i) out[i] = sparse_component_eval(sp, i, x);
}

double sparse_combine(const SparseKernelParams& sp, Point x, Point x2, const double* fa,
                      const double* fb) {
  double value = sp.scale * wendland_polynomial(wendland_scaled_distance(sp.wendland_radius, x, x2));
  for (int i = 0; i < sp.n1; ++i) value += fa[i] * fb[i];
  return value;
}

}  // namespace

double bump_eval(const BumpFunction& bump, Point x) {
  const double dist2 = squared_distance(x, bump.centroid);
  const double r2 = bump.radius * bump.radius;
  if (!(dist2 < r2)) return 0.0;
  const double q = dist2 / r2;
  return bump.amplitude * std::exp(bump.shape * (1.0 - 1.0 / (1.0 - q)));
}

std::size_t SparseKernelParams::hyperparameter_count(std::size_t dim) const {
  return 1 + wendland_radius.size() + static_cast<std::size_t>(n1 * n2) * (dim + 3);
}

void SparseKernelParams::validate(std::size_t dim) const {
  auto fail = [](const std::string& what) { throw ConfigError("sparse kernel: " + what); };
  if (n1 < 0 || n2 < 0) fail("n1 and n2 must be non-negative");
  const auto count = static_cast<std::size_t>(n1 * n2);
  if (bumps.size() != count) fail("expected n1*n2 bump functions");
  if (inclusion_probs.size() != count) fail("expected n1*n2 inclusion probabilities");
  if (!(scale >= 0.0) || !std::isfinite(scale)) fail("s0 must be finite and non-negative");
  if (wendland_radius.size() != 1 && wendland_radius.size() != dim)
    fail("r0 must have one entry or one per coordinate");
  for (double r : wendland_radius)
    if (!(r > 0.0) || !std::isfinite(r)) fail("r0 must be positive");
  for (const auto& b : bumps) {
    if (b.centroid.size() != dim) fail("bump centroid dimension mismatch");
    if (!(b.radius > 0.0)) fail("bump radius must be positive");
    if (!(b.shape > 0.0)) fail("bump shape must be positive");
    if (!(b.amplitude >= 0.0)) fail("bump amplitude must be non-negative");
  }
  for (double p : inclusion_probs)
    if (!(p >= 0.0 && p <= 1.0)) fail("inclusion probabilities must lie in [0, 1]");
}

double sparse_component_eval(const SparseKernelParams& params, int i, Point x) {
  if (i < 0 || i >= params.n1)
    throw std::out_of_range("sparse component index " + std::to_string(i) + " outside [0, " +
                            std::to_string(params.n1) + ")");
  double sum = 0.0;
  for (int j = 0; j < params.n2; ++j) {
    const auto& b = params.bump(i, j);
    if (b.amplitude == 0.0) continue;
    sum += bump_eval(b, x);
  }
  return sum;
}

double wendland_polynomial(double t) {
  if (!(t < 1.0)) return 0.0;
  const double u = 1.0 - t;
  const double u2 = u * u;
  const double u4 = u2 * u2;
  return u4 * u4 * (((35.0 * t + 25.0) * t + 8.0) * t + 1.0);
}

double wendland_eval(double r0, Point x, Point x2) {
  return wendland_polynomial(std::sqrt(squared_distance(x, x2)) / r0);
}

double wendland_eval(std::span<const double> r0, Point x, Point x2) {
  return wendland_polynomial(wendland_scaled_distance(r0, x, x2));
}

double sparse_kernel_eval(const SparseKernelParams& params, Point x, Point x2) {
  std::vector<double> fa(static_cast<std::size_t>(params.n1));
  std::vector<double> fb(static_cast<std::size_t>(params.n1));
  sparse_point(params, x, fa.data());
  sparse_point(params, x2, fb.data());
  return sparse_combine(params, x, x2, fa.data(), fb.data());
}

Smoothness smoothness_from_value(double nu) {
  if (nu == 0.5) return Smoothness::Half;
  if (nu == 1.5) return Smoothness::ThreeHalves;
  if (nu == 2.5) return Smoothness::FiveHalves;
  throw ConfigError("unsupported Matern smoothness " + std::to_string(nu) +
                    " (supported: 0.5, 1.5, 2.5)");
}

double smoothness_value(Smoothness nu) {
  switch (nu) {
    case Smoothness::Half:
      return 0.5;
    case Smoothness::ThreeHalves:
      return 1.5;
    case Smoothness::FiveHalves:
      return 2.5;
  }
  return 0.0;
}

double matern_correlation(Smoothness nu, double t) {
  switch (nu) {
    case Smoothness::Half:
      return std::exp(-t);
    case Smoothness::ThreeHalves: {
      const double s = kSqrt3 * t;
      return (1.0 + s) * std::exp(-s);
    }
    case Smoothness::FiveHalves: {
      const double s = kSqrt5 * t;
      return (1.0 + s + 5.0 * t * t / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

namespace {

double spline_raw(const NaturalSplineBasis& ns, double u) {
  if (ns.index == 0) return u;
  const auto& knots = ns.knots;
  const std::size_t last = knots.size() - 1;
  auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  auto d = [&](std::size_t k) {
    return (cube_plus(u - knots[k]) - cube_plus(u - knots[last])) / (knots[last] - knots[k]);
  };
  return d(ns.index - 1) - d(last - 1);
}

}  // namespace

double basis_eval(const BasisFunction& basis, Point x) {
  if (const auto* rb = std::get_if<RadialBasis>(&basis)) {
    return std::exp(-squared_distance(x, rb->center) / (2.0 * rb->width * rb->width));
  }
  const auto& ns = std::get<NaturalSplineBasis>(basis);
  return (spline_raw(ns, (x[ns.coordinate] - ns.lower) / (ns.upper - ns.lower)) - ns.offset) / ns.scale;
}

std::vector<BasisFunction> natural_spline_basis(std::size_t coordinate, double lower, double upper,
                                                std::size_t knot_count) {
  if (knot_count < 2) throw ConfigError("natural spline basis needs at least two knots");
  std::vector<double> knots(knot_count);
  for (std::size_t k = 0; k < knot_count; ++k)
    knots[k] = static_cast<double>(k) / static_cast<double>(knot_count - 1);
  // Columns are centred and scaled to unit standard deviation over the domain.
  constexpr int kGrid = 1001;
  std::vector<BasisFunction> out;
  for (std::size_t m = 0; m + 1 < knot_count; ++m) {
    NaturalSplineBasis ns{coordinate, lower, upper, knots, m};
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int g = 0; g < kGrid; ++g) {
      const double v = spline_raw(ns, static_cast<double>(g) / (kGrid - 1));
      sum += v;
      sum_sq += v * v;
    }
    ns.offset = sum / kGrid;
    ns.scale = std::sqrt(std::max(sum_sq / kGrid - ns.offset * ns.offset, 0.0));
    if (!(ns.scale > 0.0)) ns.scale = 1.0;
    out.emplace_back(ns);
  }
  return out;
}

double ParametricNonstationary::log_sigma(Point x) const {
  double v = log_sigma0;
  for (std::size_t m = 0; m < sigma_coeffs.size(); ++m) v += basis_eval(basis[m], x) * sigma_coeffs[m];
  return v;
}

double ParametricNonstationary::log_Sigma(Point x) const {
  double v = log_Sigma0;
  for (std::size_t m = 0; m < Sigma_coeffs.size(); ++m) v += basis_eval(basis[m], x) * Sigma_coeffs[m];
  return v;
}

double core_eval(const CoreKernelParams& params, Point x, Point x2) {
  double sa = 0.0;
  double Sa = 0.0;
  double sb = 0.0;
  double Sb = 0.0;
  core_point(params, x, sa, Sa);
  core_point(params, x2, sb, Sb);
  return core_combine(params, squared_distance(x, x2), x.size(), sa, Sa, sb, Sb);
}

double noise_variance(const NoiseParams& noise, std::size_t i) {
  if (const auto* h = std::get_if<Homoskedastic>(&noise)) return h->tau2;
  const auto& het = std::get<Heteroskedastic>(noise);
  return het.tau2_per_point.at(i);
}

double y_kernel_eval(const KernelHyperparameters& theta, Point x, Point x2) {
  const double core = core_eval(theta.core, x, x2);
  if (!theta.sparse) return core;
  return core * sparse_kernel_eval(*theta.sparse, x, x2);
}

double z_kernel_eval(const KernelHyperparameters& theta, std::size_t i, std::size_t j,
                     const InputMatrix& inputs) {
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  if (ii >= inputs.rows() || jj >= inputs.rows())
    throw std::out_of_range("z_kernel_eval: index outside the observed set");
  const double value = y_kernel_eval(theta, row(inputs, ii), row(inputs, jj));
  return i == j ? value + noise_variance(theta.noise, i) : value;
}

KernelFeatures::KernelFeatures(const KernelHyperparameters& theta, const InputMatrix& inputs)
    : theta_(&theta), inputs_(&inputs) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  sigma_.resize(n);
  Sigma_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    core_point(theta.core, row(inputs, static_cast<Eigen::Index>(i)), sigma_[i], Sigma_[i]);
  if (theta.sparse) {
    n1_ = theta.sparse->n1;
    components_.resize(n * static_cast<std::size_t>(n1_));
    for (std::size_t i = 0; i < n; ++i)
      sparse_point(*theta.sparse, row(inputs, static_cast<Eigen::Index>(i)),
                   components_.data() + i * static_cast<std::size_t>(n1_));
  }
}

double KernelFeatures::pair(const KernelFeatures& a, Eigen::Index i, const KernelFeatures& b,
                            Eigen::Index j) {
  const Point x = row(*a.inputs_, i);
  const Point x2 = row(*b.inputs_, j);
  const auto ui = static_cast<std::size_t>(i);
  const auto uj = static_cast<std::size_t>(j);
  const auto& theta = *a.theta_;
  const double core = core_combine(theta.core, squared_distance(x, x2), x.size(), a.sigma_[ui],
                                   a.Sigma_[ui], b.sigma_[uj], b.Sigma_[uj]);
  if (!theta.sparse) return core;
  const auto n1 = static_cast<std::size_t>(a.n1_);
  return core * sparse_combine(*theta.sparse, x, x2, a.components_.data() + ui * n1,
                               b.components_.data() + uj * n1);
}

double KernelFeatures::sparse_pair(Eigen::Index i, Eigen::Index j) const {
  if (!theta_->sparse) return 1.0;
  const auto n1 = static_cast<std::size_t>(n1_);
  return sparse_combine(*theta_->sparse, row(*inputs_, i), row(*inputs_, j),
                        components_.data() + static_cast<std::size_t>(i) * n1,
                        components_.data() + static_cast<std::size_t>(j) * n1);
}

}  // namespace sparsegp::kernels
