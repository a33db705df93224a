#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparsegp/common.hpp"

namespace sparsegp::linalg {

using Index = std::int64_t;

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Symmetric matrix in compressed sparse row form with both triangles stored.
///
/// Invariants (checked on construction): monotone row offsets, strictly
/// increasing column indices within a row, and (i, j) present iff (j, i) is
/// present with an identical value. Immutable once built.
class SparseSymmetricMatrix {
 public:
  SparseSymmetricMatrix() = default;
  SparseSymmetricMatrix(Index dim, std::vector<Index> row_offsets, std::vector<Index> col_indices,
                        std::vector<double> values);

  /// Builds from a full (both-triangle) triplet list. Duplicates are rejected.
  static SparseSymmetricMatrix from_triplets(Index dim, std::vector<Triplet> triplets);
  /// Keeps every entry that is not exactly 0.0. `dense` must be exactly symmetric.
  static SparseSymmetricMatrix from_dense(const Matrix& dense);
  static SparseSymmetricMatrix identity(Index dim, double value = 1.0);

  Index dim() const { return dim_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }
  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  /// Returns 0.0 for structurally absent entries.
  double coeff(Index i, Index j) const;
  Vector diagonal() const;
  Matrix to_dense() const;

  void multiply(const Vector& x, Vector& y) const;
  Vector operator*(const Vector& x) const;

  /// Copy with `shift` added to every diagonal entry (missing diagonals are inserted).
  SparseSymmetricMatrix with_diagonal_shift(double shift) const;

  friend bool operator==(const SparseSymmetricMatrix&, const SparseSymmetricMatrix&) = default;

 private:
  void validate() const;

  Index dim_ = 0;
  std::vector<Index> row_offsets_{0};
  std::vector<Index> col_indices_;
  std::vector<double> values_;
};

/// nnz / N^2.
double sparsity_fraction(const SparseSymmetricMatrix& a);

/// Matrix Market coordinate/real/general with every stored entry written
/// (both triangles), values printed with 17 significant digits so a
/// read-back reproduces the matrix exactly. Each comment line gets a "% " prefix.
void write_matrix_market(std::ostream& out, const SparseSymmetricMatrix& a,
                         const std::vector<std::string>& comments = {});
SparseSymmetricMatrix read_matrix_market(std::istream& in);

}  // namespace sparsegp::linalg
