#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sparsegp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Input locations, one point per row. Row-major so every point is a contiguous span.
using InputMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// A single input location x in R^d.
using Point = std::span<const double>;

inline Point row(const InputMatrix& x, Eigen::Index i) {
  return {x.data() + i * x.cols(), static_cast<std::size_t>(x.cols())};
}

// Error taxonomy. The CLI maps these onto exit codes 2/3/4.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparsegp
