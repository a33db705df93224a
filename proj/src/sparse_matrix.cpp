#include "sparsegp/sparse_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sparsegp::linalg {

SparseSymmetricMatrix::SparseSymmetricMatrix(Index dim, std::vector<Index> row_offsets,
                                             std::vector<Index> col_indices,
                                             std::vector<double> values)
    : dim_(dim),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  validate();
}

void SparseSymmetricMatrix::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid sparse matrix: " + what);
  };
  if (dim_ < 0) fail("negative dimension");
  if (row_offsets_.size() != static_cast<std::size_t>(dim_ + 1)) fail("row_offsets length != N+1");
  if (row_offsets_.front() != 0) fail("row_offsets must start at 0");
  if (col_indices_.size() != values_.size()) fail("index/value length mismatch");
  if (row_offsets_.back() != static_cast<Index>(values_.size())) fail("row_offsets end != nnz");
  for (Index i = 0; i < dim_; ++i) {
    const Index begin = row_offsets_[static_cast<std::size_t>(i)];
    const Index end = row_offsets_[static_cast<std::size_t>(i + 1)];
    if (end < begin) fail("row_offsets not monotone");
    for (Index k = begin; k < end; ++k) {
      const Index c = col_indices_[static_cast<std::size_t>(k)];
      if (c < 0 || c >= dim_) fail("column index out of range");
      if (k > begin && c <= col_indices_[static_cast<std::size_t>(k - 1)])
        fail("column indices not strictly increasing in row " + std::to_string(i));
    }
  }
  for (Index i = 0; i < dim_; ++i) {
    for (Index k = row_offsets_[static_cast<std::size_t>(i)];
         k < row_offsets_[static_cast<std::size_t>(i + 1)]; ++k) {
      const Index j = col_indices_[static_cast<std::size_t>(k)];
      if (j == i) continue;
      const auto rb = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(j)];
      const auto re = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(j + 1)];
      const auto it = std::lower_bound(rb, re, i);
      if (it == re || *it != i) fail("structurally asymmetric");
      if (values_[static_cast<std::size_t>(it - col_indices_.begin())] !=
          values_[static_cast<std::size_t>(k)])
        fail("numerically asymmetric");
    }
  }
}

SparseSymmetricMatrix SparseSymmetricMatrix::from_triplets(Index dim, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Index> offsets(static_cast<std::size_t>(dim + 1), 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  cols.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (t.row < 0 || t.row >= dim || t.col < 0 || t.col >= dim)
      throw std::invalid_argument("triplet index out of range");
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col)
      throw std::invalid_argument("duplicate triplet entry");
    ++offsets[static_cast<std::size_t>(t.row + 1)];
    cols.push_back(t.col);
    vals.push_back(t.value);
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  return {dim, std::move(offsets), std::move(cols), std::move(vals)};
}

SparseSymmetricMatrix SparseSymmetricMatrix::from_dense(const Matrix& dense) {
  if (dense.rows() != dense.cols()) throw std::invalid_argument("from_dense: matrix not square");
  const Index n = dense.rows();
  std::vector<Index> offsets{0};
  std::vector<Index> cols;
  std::vector<double> vals;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (dense(i, j) != 0.0) {
        cols.push_back(j);
        vals.push_back(dense(i, j));
      }
    }
    offsets.push_back(static_cast<Index>(vals.size()));
  }
  return {n, std::move(offsets), std::move(cols), std::move(vals)};
}

SparseSymmetricMatrix SparseSymmetricMatrix::identity(Index dim, double value) {
  std::vector<Index> offsets(static_cast<std::size_t>(dim + 1));
  std::vector<Index> cols(static_cast<std::size_t>(dim));
  for (Index i = 0; i <= dim; ++i) offsets[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < dim; ++i) cols[static_cast<std::size_t>(i)] = i;
  return {dim, std::move(offsets), std::move(cols),
          std::vector<double>(static_cast<std::size_t>(dim), value)};
}

double SparseSymmetricMatrix::coeff(Index i, Index j) const {
  const auto rb = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(i)];
  const auto re = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(i + 1)];
  const auto it = std::lower_bound(rb, re, j);
  if (it == re || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

Vector SparseSymmetricMatrix::diagonal() const {
  Vector d(dim_);
  for (Index i = 0; i < dim_; ++i) d(i) = coeff(i, i);
  return d;
}

Matrix SparseSymmetricMatrix::to_dense() const {
  Matrix out = Matrix::Zero(dim_, dim_);
  for (Index i = 0; i < dim_; ++i)
    for (Index k = row_offsets_[static_cast<std::size_t>(i)];
         k < row_offsets_[static_cast<std::size_t>(i + 1)]; ++k)
      out(i, col_indices_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
  return out;
}

void SparseSymmetricMatrix::multiply(const Vector& x, Vector& y) const {
  y.resize(dim_);
  const Index* cols = col_indices_.data();
  const double* vals = values_.data();
  for (Index i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (Index k = row_offsets_[static_cast<std::size_t>(i)];
         k < row_offsets_[static_cast<std::size_t>(i + 1)]; ++k)
      acc += vals[k] * x(cols[k]);
    y(i) = acc;
  }
}

Vector SparseSymmetricMatrix::operator*(const Vector& x) const {
  Vector y;
  multiply(x, y);
  return y;
}

SparseSymmetricMatrix SparseSymmetricMatrix::with_diagonal_shift(double shift) const {
  std::vector<Index> offsets{0};
  std::vector<Index> cols;
  std::vector<double> vals;
  cols.reserve(col_indices_.size() + static_cast<std::size_t>(dim_));
  vals.reserve(values_.size() + static_cast<std::size_t>(dim_));
  for (Index i = 0; i < dim_; ++i) {
    bool placed = false;
    for (Index k = row_offsets_[static_cast<std::size_t>(i)];
         k < row_offsets_[static_cast<std::size_t>(i + 1)]; ++k) {
      const Index j = col_indices_[static_cast<std::size_t>(k)];
      if (!placed && j > i) {
        cols.push_back(i);
        vals.push_back(shift);
        placed = true;
      }
      cols.push_back(j);
      vals.push_back(values_[static_cast<std::size_t>(k)] + (j == i ? shift : 0.0));
      if (j == i) placed = true;
    }
    if (!placed) {
      cols.push_back(i);
      vals.push_back(shift);
    }
    offsets.push_back(static_cast<Index>(vals.size()));
  }
  return {dim_, std::move(offsets), std::move(cols), std::move(vals)};
}

double sparsity_fraction(const SparseSymmetricMatrix& a) {
  if (a.dim() == 0) return 0.0;
  const double n = static_cast<double>(a.dim());
  return static_cast<double>(a.nnz()) / (n * n);
}

void write_matrix_market(std::ostream& out, const SparseSymmetricMatrix& a,
                         const std::vector<std::string>& comments) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  for (const auto& c : comments) out << "% " << c << '\n';
  out << a.dim() << ' ' << a.dim() << ' ' << a.nnz() << '\n';
  char buf[64];
  for (Index i = 0; i < a.dim(); ++i) {
    for (Index k = a.row_offsets()[static_cast<std::size_t>(i)];
         k < a.row_offsets()[static_cast<std::size_t>(i + 1)]; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", a.values()[static_cast<std::size_t>(k)]);
      out << (i + 1) << ' ' << (a.col_indices()[static_cast<std::size_t>(k)] + 1) << ' ' << buf
          << '\n';
    }
  }
}

SparseSymmetricMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw DataError("matrix market: missing banner");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (object != "matrix" || format != "coordinate" || field != "real")
    throw DataError("matrix market: only 'matrix coordinate real' is supported");
  const bool symmetric_storage = symmetry == "symmetric";
  if (!symmetric_storage && symmetry != "general")
    throw DataError("matrix market: unsupported symmetry '" + symmetry + "'");
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream size_line(line);
  Index rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols >> entries) || rows != cols)
    throw DataError("matrix market: bad size line");
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(symmetric_storage ? 2 * entries : entries));
  for (Index k = 0; k < entries; ++k) {
    if (!std::getline(in, line)) throw DataError("matrix market: truncated entry list");
    std::istringstream entry(line);
    Index i = 0, j = 0;
    std::string value_text;
    if (!(entry >> i >> j >> value_text)) throw DataError("matrix market: bad entry line");
    double value = 0.0;
    const auto res = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
    if (res.ec != std::errc()) throw DataError("matrix market: bad value '" + value_text + "'");
    triplets.push_back({i - 1, j - 1, value});
    if (symmetric_storage && i != j) triplets.push_back({j - 1, i - 1, value});
  }
  try {
    return SparseSymmetricMatrix::from_triplets(rows, std::move(triplets));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("matrix market: ") + e.what());
  }
}

}  // namespace sparsegp::linalg
