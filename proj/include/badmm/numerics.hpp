#ifndef BADMM_NUMERICS_HPP_
#define BADMM_NUMERICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace badmm {

/// Dense real matrix. Every operand of the library (iterates, observations,
/// multipliers, constraint operators) is one of these; a vector is a
/// one-column matrix.
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when a numerical kernel fails or produces non-finite output.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on operand shape mismatches and malformed inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": matrix contains NaN or Inf");
  }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

/// Builds a matrix from row-major entries, enforcing rows, cols >= 1 and
/// finiteness.
inline Matrix make_matrix(Index rows, Index cols, std::span<const double> row_major) {
  if (rows < 1 || cols < 1) throw ShapeError("make_matrix: dimensions must be >= 1");
  if (static_cast<std::size_t>(rows * cols) != row_major.size()) {
    throw ShapeError("make_matrix: entry count " + std::to_string(row_major.size()) +
                     " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = row_major[static_cast<std::size_t>(i * cols + j)];
  require_finite(m, "make_matrix");
  return m;
}

struct SvdResult {
  Matrix u;                ///< m x k, orthonormal columns
  Eigen::VectorXd singular_values;  ///< length k = min(m, n), nonincreasing
  Matrix vt;               ///< k x n, orthonormal rows

  Matrix reconstruct() const { return u * singular_values.asDiagonal() * vt; }
};

/// Thin SVD. Throws NumericError if the kernel does not converge or returns
/// non-finite factors.
inline SvdResult svd(const Matrix& m) {
  require_finite(m, "svd");
  Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) throw NumericError("svd: kernel did not converge");
  SvdResult out{solver.matrixU(), solver.singularValues(), solver.matrixV().transpose()};
  if (!out.u.allFinite() || !out.vt.allFinite() || !out.singular_values.allFinite()) {
    throw NumericError("svd: kernel returned non-finite factors");
  }
  return out;
}

inline double fro_norm(const Matrix& m) { return m.norm(); }

inline double inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "inner");
  return (a.array() * b.array()).sum();
}

/// Smallest eigenvalue of C C^T, as the squared smallest singular value of C.
/// Zero when C is row-rank-deficient (including more rows than columns).
inline double spectral_norm_lower_bound(const Matrix& c) {
  if (c.rows() > c.cols()) return 0.0;
  const SvdResult f = svd(c);
  const double smax = f.singular_values.size() ? f.singular_values(0) : 0.0;
  const double smin = f.singular_values(f.singular_values.size() - 1);
  const double tol = std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(c.rows(), c.cols())) * smax;
  if (smin <= tol) return 0.0;
  return smin * smin;
}

/// Best rank-r approximation U_r diag(s_r) V_r^T.
inline Matrix truncated_svd(const Matrix& m, Index rank) {
  const SvdResult f = svd(m);
  const Index r = std::clamp<Index>(rank, 0, f.singular_values.size());
  return f.u.leftCols(r) * f.singular_values.head(r).asDiagonal() * f.vt.topRows(r);
}

}  // namespace badmm

#endif  // BADMM_NUMERICS_HPP_
