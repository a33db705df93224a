#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sparsegp/common.hpp"
#include "sparsegp/kernels.hpp"
#include "sparsegp/sparse_matrix.hpp"

namespace sparsegp::linalg {

/// How the lower triangle is split into row blocks for the worker pool.
struct AssemblyPlan {
  std::size_t batch_size = 256;
  std::size_t worker_count = 1;

  /// Half-open row ranges [begin, end) covering [0, n) disjointly, in order.
  std::vector<std::pair<Index, Index>> blocks(Index n) const;
};

/// C_z (include_noise) or C_y over the rows of `inputs`, evaluated densely in
/// row blocks of the lower triangle; exact zeros are dropped and the upper
/// triangle mirrored on merge. Output is identical for every plan.
/// Throws NumericalError naming the pair on a non-finite kernel value.
SparseSymmetricMatrix assemble_covariance(const InputMatrix& inputs,
                                          const kernels::KernelHyperparameters& theta,
                                          const AssemblyPlan& plan, bool include_noise);

/// C_sparse only, optionally normalized to unit diagonal by
/// C(x,x') / sqrt(C(x,x) C(x',x')).
SparseSymmetricMatrix assemble_sparse_factor(const InputMatrix& inputs,
                                             const kernels::KernelHyperparameters& theta,
                                             const AssemblyPlan& plan, bool normalized);

/// Dense C_y between every query point (rows) and every reference point (cols).
Matrix cross_covariance(const kernels::KernelFeatures& query, const kernels::KernelFeatures& reference);

/// Dense symmetric C_y over one point set.
Matrix dense_covariance(const kernels::KernelFeatures& points);

struct GuardedMatrix {
  SparseSymmetricMatrix matrix;
  double jitter = 0.0;
};

/// If min(diag) < 1e-12 max(diag), adds 1e-8 max(diag) to the diagonal and logs it.
GuardedMatrix apply_conditioning_guard(const SparseSymmetricMatrix& a);

}  // namespace sparsegp::linalg
