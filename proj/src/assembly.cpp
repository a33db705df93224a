#include "sparsegp/assembly.hpp"

#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sparsegp/parallel.hpp"

namespace sparsegp::linalg {

namespace {

struct LowerEntry {
  Index row;
  Index col;
  double value;
};

// Evaluates value(i, j) for j <= i block by block, keeps non-zeros, and merges
// the blocks in row order into a CSR matrix with both triangles.
template <typename ValueFn>
SparseSymmetricMatrix assemble_lower(Index n, const AssemblyPlan& plan, const ValueFn& value) {
  const auto blocks = plan.blocks(n);
  std::vector<std::vector<LowerEntry>> parts(blocks.size());
  parallel_for(blocks.size(), plan.worker_count, [&](std::size_t b) {
    auto& out = parts[b];
    for (Index i = blocks[b].first; i < blocks[b].second; ++i) {
      for (Index j = 0; j <= i; ++j) {
        const double v = value(i, j);
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << "non-finite covariance value " << v << " at pair (" << i << ", " << j << ")";
          throw NumericalError(msg.str());
        }
        if (v != 0.0) out.push_back({i, j, v});
      }
    }
  });

  std::vector<Index> counts(static_cast<std::size_t>(n), 0);
  for (const auto& part : parts)
    for (const auto& e : part) {
      ++counts[static_cast<std::size_t>(e.row)];
      if (e.col != e.row) ++counts[static_cast<std::size_t>(e.col)];
    }
  std::vector<Index> offsets(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 0; i < n; ++i)
    offsets[static_cast<std::size_t>(i + 1)] =
        offsets[static_cast<std::size_t>(i)] + counts[static_cast<std::size_t>(i)];
  const auto nnz = static_cast<std::size_t>(offsets.back());
  std::vector<Index> cols(nnz);
  std::vector<double> vals(nnz);
  std::vector<Index> fill(offsets.begin(), offsets.end() - 1);
  // Rows arrive in increasing order: row i receives its own lower entries
  // (columns <= i, ascending) before any mirrored entry (columns > i), so each
  // row ends up sorted without an extra pass.
  for (const auto& part : parts)
    for (const auto& e : part) {
      auto& fr = fill[static_cast<std::size_t>(e.row)];
      cols[static_cast<std::size_t>(fr)] = e.col;
      vals[static_cast<std::size_t>(fr)] = e.value;
      ++fr;
      if (e.col != e.row) {
        auto& fc = fill[static_cast<std::size_t>(e.col)];
        cols[static_cast<std::size_t>(fc)] = e.row;
        vals[static_cast<std::size_t>(fc)] = e.value;
        ++fc;
      }
    }
  return {n, std::move(offsets), std::move(cols), std::move(vals)};
}

}  // namespace

std::vector<std::pair<Index, Index>> AssemblyPlan::blocks(Index n) const {
  if (batch_size == 0) throw ConfigError("assembly batch size must be positive");
  if (worker_count == 0) throw ConfigError("assembly worker count must be positive");
  std::vector<std::pair<Index, Index>> out;
  const auto b = static_cast<Index>(batch_size);
  for (Index start = 0; start < n; start += b) out.emplace_back(start, std::min(n, start + b));
  return out;
}

SparseSymmetricMatrix assemble_covariance(const InputMatrix& inputs,
                                          const kernels::KernelHyperparameters& theta,
                                          const AssemblyPlan& plan, bool include_noise) {
  const kernels::KernelFeatures features(theta, inputs);
  return assemble_lower(inputs.rows(), plan, [&](Index i, Index j) {
    const double v = features.pair(i, j);
    if (include_noise && i == j) return v + kernels::noise_variance(theta.noise, static_cast<std::size_t>(i));
    return v;
  });
}

SparseSymmetricMatrix assemble_sparse_factor(const InputMatrix& inputs,
                                             const kernels::KernelHyperparameters& theta,
                                             const AssemblyPlan& plan, bool normalized) {
  const kernels::KernelFeatures features(theta, inputs);
  Vector diag(inputs.rows());
  if (normalized)
    for (Index i = 0; i < inputs.rows(); ++i) diag(i) = features.sparse_pair(i, i);
  return assemble_lower(inputs.rows(), plan, [&](Index i, Index j) {
    if (!normalized) return features.sparse_pair(i, j);
    if (i == j) return 1.0;
    return features.sparse_pair(i, j) / std::sqrt(diag(i) * diag(j));
  });
}

Matrix cross_covariance(const kernels::KernelFeatures& query, const kernels::KernelFeatures& reference) {
  Matrix out(query.size(), reference.size());
  for (Index j = 0; j < reference.size(); ++j)
    for (Index i = 0; i < query.size(); ++i)
      out(i, j) = kernels::KernelFeatures::pair(query, i, reference, j);
  return out;
}

Matrix dense_covariance(const kernels::KernelFeatures& points) {
  const Index n = points.size();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) {
      const double v = points.pair(i, j);
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

GuardedMatrix apply_conditioning_guard(const SparseSymmetricMatrix& a) {
  if (a.dim() == 0) return {a, 0.0};
  const Vector d = a.diagonal();
  const double dmax = d.maxCoeff();
  const double dmin = d.minCoeff();
  if (dmax > 0.0 && dmin < 1e-12 * dmax) {
    const double jitter = 1e-8 * dmax;
    spdlog::info("conditioning guard: min diagonal {:.3e} < 1e-12 x max {:.3e}; adding jitter {:.3e}",
                 dmin, dmax, jitter);
    return {a.with_diagonal_shift(jitter), jitter};
  }
  return {a, 0.0};
}

}  // namespace sparsegp::linalg
