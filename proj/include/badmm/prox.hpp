#ifndef BADMM_PROX_HPP_
#define BADMM_PROX_HPP_

#include <cmath>
#include <numbers>

#include "badmm/numerics.hpp"

namespace badmm {

/// argmin_s 1/2 (s - a)^2 + tau |s|  =  sign(a) max(|a| - tau, 0).
inline double soft_shrink(double a, double tau) {
  if (a > tau) return a - tau;
  if (a < -tau) return a + tau;
  return 0.0;
}

/// Anchor magnitude at or below which half_shrink returns 0.
inline double half_shrink_threshold(double tau) { return 1.5 * std::cbrt(tau * tau); }

/// Global minimizer of 1/2 (s - a)^2 + tau |s|^(1/2).
///
/// Above the threshold the minimizer is sign(a) t^2, where t is the largest
/// root of t^3 - |a| t + tau/2 = 0 (the stationarity condition in t = sqrt|s|),
/// taken in trigonometric form. At the threshold 0 and the nonzero root tie;
/// 0 is returned.
inline double half_shrink(double a, double tau) {
  const double mag = std::abs(a);
  if (tau <= 0.0) return a;
  if (mag <= half_shrink_threshold(tau)) return 0.0;
  const double c = 0.25 * tau * std::pow(3.0 / mag, 1.5);
  const double phase = 2.0 * std::numbers::pi / 3.0 - (2.0 / 3.0) * std::acos(c);
  const double s = (2.0 / 3.0) * mag * (1.0 + std::cos(phase));
  return a > 0 ? s : -s;
}

inline Matrix soft_shrink_matrix(const Matrix& m, double tau) {
  return m.unaryExpr([tau](double a) { return soft_shrink(a, tau); });
}

inline Matrix half_shrink_matrix(const Matrix& m, double tau) {
  return m.unaryExpr([tau](double a) { return half_shrink(a, tau); });
}

/// Singular value thresholding: U diag(soft_shrink(s_i, tau)) V^T, the
/// minimizer of 1/2 ||X - M||_F^2 + tau ||X||_*.
inline Matrix svt(const Matrix& m, double tau) {
  const SvdResult f = svd(m);
  const Eigen::VectorXd shrunk =
      f.singular_values.unaryExpr([tau](double s) { return soft_shrink(s, tau); });
  Index k = 0;
  while (k < shrunk.size() && shrunk(k) > 0.0) ++k;
  if (k == 0) return Matrix::Zero(m.rows(), m.cols());
  return f.u.leftCols(k) * shrunk.head(k).asDiagonal() * f.vt.topRows(k);
}

inline double nuclear_norm(const Matrix& m) { return svd(m).singular_values.sum(); }

/// sum_ij |m_ij|^(1/2)
inline double half_quasi_norm(const Matrix& m) { return m.cwiseAbs().cwiseSqrt().sum(); }

}  // namespace badmm

#endif  // BADMM_PROX_HPP_
