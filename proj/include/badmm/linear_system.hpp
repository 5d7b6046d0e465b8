#ifndef BADMM_LINEAR_SYSTEM_HPP_
#define BADMM_LINEAR_SYSTEM_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "badmm/engine.hpp"
#include "badmm/random.hpp"

namespace badmm {

// Find x with A_1 x_1 + ... + A_N x_N = 0, treated as the coupled problem
// with all f_i = 0 and proximal weights gamma_i. The last block must be
// square and nonsingular so the penalty threshold is finite. Each block
// update is the quadratic minimizer
//
//   x_i = (alpha A_i^T A_i + gamma_i I)^{-1} (gamma_i x_i^k - A_i^T (alpha rest + p)).

inline ProblemSpec linear_system_spec(const std::vector<Matrix>& a_blocks, const std::vector<double>& gammas,
                                      double alpha) {
  if (a_blocks.empty()) throw ShapeError("linear system: no blocks");
  if (gammas.size() != a_blocks.size()) {
    throw ShapeError("linear system: " + std::to_string(a_blocks.size()) + " blocks but " +
                     std::to_string(gammas.size()) + " proximal weights");
  }
  const Matrix& last = a_blocks.back();
  if (last.rows() != last.cols()) {
    throw ValidationError("linear system: last block must be square, got " + shape_string(last));
  }
  if (!(spectral_norm_lower_bound(last) > 0.0)) {
    throw ValidationError("linear system: last block is singular");
  }
  if (!(gammas.back() > 0.0)) throw ValidationError("linear system: last proximal weight must be positive");

  ProblemSpec spec;
  spec.alpha = alpha;
  for (std::size_t i = 0; i < a_blocks.size(); ++i) {
    const Matrix& a = a_blocks[i];
    if (a.rows() != last.rows()) {
      throw ShapeError("linear system: block " + std::to_string(i + 1) + " has " + std::to_string(a.rows()) +
                       " rows, expected " + std::to_string(last.rows()));
    }
    require_finite(a, "linear system block");
    if (!(gammas[i] >= 0.0)) throw std::invalid_argument("linear system: proximal weights must be nonnegative");
    BlockSpec b;
    b.name = "x" + std::to_string(i + 1);
    b.constraint_matrix = a;
    b.objective_value = [](const Matrix&) { return 0.0; };
    b.bregman = gammas[i] > 0.0 ? squared_euclidean(gammas[i]) : no_bregman();
    b.objective_smooth_lipschitz = 0.0;
    const Matrix ata = a.transpose() * a;
    b.subproblem_solver = [a, ata](const SubproblemInput& in) -> Matrix {
      const double g = in.bregman.strong_convexity_mu;
      const Matrix normal = in.alpha * ata + g * Matrix::Identity(ata.rows(), ata.cols());
      Eigen::LLT<Matrix> llt(normal);
      if (llt.info() != Eigen::Success) throw NumericError("singular normal matrix");
      const Matrix rhs = g * in.current - a.transpose() * (in.alpha * in.rest + in.multiplier);
      return llt.solve(rhs);
    };
    spec.blocks.push_back(std::move(b));
  }
  return spec;
}

/// Random start with i.i.d. N(0, 1) entries, one column.
inline std::vector<Matrix> linear_system_random_start(const std::vector<Matrix>& a_blocks, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> x;
  for (const auto& a : a_blocks) x.push_back(rng.gaussian_matrix(a.cols(), 1));
  return x;
}

}  // namespace badmm

#endif  // BADMM_LINEAR_SYSTEM_HPP_
