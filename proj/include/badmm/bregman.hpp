#ifndef BADMM_BREGMAN_HPP_
#define BADMM_BREGMAN_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <string_view>

#include "badmm/format.hpp"
#include "badmm/matrix_io.hpp"
#include "badmm/numerics.hpp"

namespace badmm {

enum class BregmanDomain { all_reals, positive_orthant };

enum class BregmanKind { squared_euclidean, mahalanobis, itakura_saito, kullback_leibler, custom };

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bregman distance generated by a convex differentiable phi:
///
///   D(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>.
///
/// `strong_convexity_mu` and `grad_lipschitz_ell` feed the descent constants
/// of the engine. When `constants_available` is false (entropy-type
/// generators, which are neither globally strongly convex nor globally
/// smooth) both are reported as 0 and the engine's checked mode rejects the
/// block.
struct BregmanDistance {
  std::string name;
  BregmanKind kind = BregmanKind::custom;
  std::function<double(const Matrix&)> phi;
  std::function<Matrix(const Matrix&)> grad_phi;
  double strong_convexity_mu = 0.0;
  double grad_lipschitz_ell = 0.0;
  BregmanDomain domain = BregmanDomain::all_reals;
  bool constants_available = true;
  /// Closed-form D(x, y) when the generic formula loses precision; empty for
  /// custom generators.
  std::function<double(const Matrix&, const Matrix&)> direct;

  bool in_domain(const Matrix& x) const {
    if (!x.allFinite()) return false;
    if (domain == BregmanDomain::positive_orthant) return (x.array() > 0.0).all();
    return true;
  }
};

inline double distance(const BregmanDistance& d, const Matrix& x, const Matrix& y) {
  require_same_shape(x, y, "bregman distance");
  if (!d.in_domain(x) || !d.in_domain(y)) {
    throw DomainError(d.name + ": argument outside the generator's domain");
  }
  if (d.direct) return d.direct(x, y);
  return d.phi(x) - d.phi(y) - inner(d.grad_phi(y), x - y);
}

/// phi(x) = (gamma/2) ||x||^2, so D(x, y) = (gamma/2) ||x - y||^2 and
/// mu = ell = gamma.
inline BregmanDistance squared_euclidean(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("squared_euclidean: gamma must be positive, got " +
                                format_double(gamma));
  }
  BregmanDistance d;
  d.name = "sq_euclid:" + format_double(gamma);
  d.kind = BregmanKind::squared_euclidean;
  d.phi = [gamma](const Matrix& x) { return 0.5 * gamma * x.squaredNorm(); };
  d.grad_phi = [gamma](const Matrix& x) -> Matrix { return gamma * x; };
  d.direct = [gamma](const Matrix& x, const Matrix& y) { return 0.5 * gamma * (x - y).squaredNorm(); };
  d.strong_convexity_mu = gamma;
  d.grad_lipschitz_ell = gamma;
  return d;
}

/// phi = 0: no proximal term. For blocks whose objective is strongly convex
/// on its own.
inline BregmanDistance no_bregman() {
  BregmanDistance d;
  d.name = "none";
  d.kind = BregmanKind::custom;
  d.phi = [](const Matrix&) { return 0.0; };
  d.grad_phi = [](const Matrix& x) -> Matrix { return Matrix::Zero(x.rows(), x.cols()); };
  d.direct = [](const Matrix&, const Matrix&) { return 0.0; };
  return d;
}

/// phi(x) = (1/2) <Q x, x>, i.e. D(x, y) = (1/2) <Q (x - y), x - y>.
///
/// The 1/2 is deliberate: with Q = gamma * I this is exactly
/// squared_euclidean(gamma). For matrix arguments Q acts on each column.
inline BregmanDistance mahalanobis(const Matrix& q) {
  require_finite(q, "mahalanobis");
  if (q.rows() != q.cols()) throw ShapeError("mahalanobis: Q must be square, got " + shape_string(q));
  const double scale = 1.0 + q.cwiseAbs().maxCoeff();
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("mahalanobis: Q is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (q + q.transpose()), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("mahalanobis: eigensolver failed");
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) throw std::invalid_argument("mahalanobis: Q is not positive definite");

  BregmanDistance d;
  d.name = "mahalanobis";
  d.kind = BregmanKind::mahalanobis;
  d.phi = [q](const Matrix& x) { return 0.5 * (x.array() * (q * x).array()).sum(); };
  d.grad_phi = [q](const Matrix& x) -> Matrix { return q * x; };
  d.direct = [q](const Matrix& x, const Matrix& y) {
    const Matrix diff = x - y;
    return 0.5 * (diff.array() * (q * diff).array()).sum();
  };
  d.strong_convexity_mu = lmin;
  d.grad_lipschitz_ell = lmax;
  return d;
}

/// Entropy generator phi(x) = sum x log x on the positive orthant:
/// D(x, y) = sum x log(x/y) - sum (x - y).
inline BregmanDistance itakura_saito() {
  BregmanDistance d;
  d.name = "itakura_saito";
  d.kind = BregmanKind::itakura_saito;
  d.domain = BregmanDomain::positive_orthant;
  d.constants_available = false;
  d.phi = [](const Matrix& x) { return (x.array() * x.array().log()).sum(); };
  d.grad_phi = [](const Matrix& x) -> Matrix { return (x.array().log() + 1.0).matrix(); };
  d.direct = [](const Matrix& x, const Matrix& y) {
    return (x.array() * (x.array() / y.array()).log()).sum() - (x - y).sum();
  };
  return d;
}

/// D(x, y) = sum x log(x/y). Shares the entropy generator with
/// itakura_saito() and coincides with its Bregman distance when sum x = sum y;
/// nonnegativity holds on such equal-mass pairs.
inline BregmanDistance kullback_leibler() {
  BregmanDistance d = itakura_saito();
  d.name = "kullback_leibler";
  d.kind = BregmanKind::kullback_leibler;
  d.direct = [](const Matrix& x, const Matrix& y) {
    return (x.array() * (x.array() / y.array()).log()).sum();
  };
  return d;
}

/// Parses `sq_euclid:<gamma>`, `mahalanobis:<matrix-file>`, `itakura_saito`,
/// `kullback_leibler`.
inline BregmanDistance parse_bregman(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view head = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  if (head == "sq_euclid") {
    double g = 0;
    if (!parse_double(arg, g)) throw std::invalid_argument("sq_euclid: expected sq_euclid:<gamma>");
    return squared_euclidean(g);
  }
  if (head == "mahalanobis") {
    if (arg.empty()) throw std::invalid_argument("mahalanobis: expected mahalanobis:<matrix-file>");
    return mahalanobis(load_matrix(std::string(arg)));
  }
  if (head == "itakura_saito" && arg.empty()) return itakura_saito();
  if (head == "kullback_leibler" && arg.empty()) return kullback_leibler();
  throw std::invalid_argument("unknown Bregman distance '" + std::string(spec) + "'");
}

}  // namespace badmm

#endif  // BADMM_BREGMAN_HPP_
