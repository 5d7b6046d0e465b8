#ifndef BADMM_ENGINE_HPP_
#define BADMM_ENGINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "badmm/bregman.hpp"
#include "badmm/numerics.hpp"
#include "badmm/random.hpp"
#include "badmm/trace.hpp"

namespace badmm {

// Problem form:
//
//   min  f_1(x_1) + ... + f_N(x_N)   s.t.  A_1 x_1 + ... + A_N x_N = 0
//
// with the last objective smooth. One step sweeps the blocks in order, each
// minimizing the augmented Lagrangian plus its Bregman term with the others
// held at their freshest values, then updates p += alpha * sum A_i x_i.

enum class EngineMode { constrained, unconstrained_badm };

/// Everything a block solver needs. `blocks` is the Gauss-Seidel snapshot:
/// entries before `block` already hold x^{k+1}, entries after hold x^k.
/// `rest` is sum_{j != block} A_j blocks[j]. In unconstrained_badm mode
/// alpha = 0 and rest, multiplier are zero.
struct SubproblemInput {
  std::size_t block = 0;
  std::span<const Matrix> blocks;
  const Matrix& current;
  const Matrix& rest;
  const Matrix& multiplier;
  double alpha = 0.0;
  const BregmanDistance& bregman;
  EngineMode mode = EngineMode::constrained;
};

/// Must return the exact minimizer over x of
///   f_i(x) + <p, A_i x> + (alpha/2) ||A_i x + rest||^2 + D_phi(x, current).
/// If the minimizer is not unique, whichever one is returned is used.
using SubproblemSolver = std::function<Matrix(const SubproblemInput&)>;

struct BlockSpec {
  std::string name;
  Matrix constraint_matrix;
  std::function<double(const Matrix&)> objective_value;
  SubproblemSolver subproblem_solver;
  BregmanDistance bregman = no_bregman();
  std::optional<double> objective_smooth_lipschitz;  // required on the last block
  double objective_strong_convexity = 0.0;

  double modulus() const { return std::max(objective_strong_convexity, bregman.strong_convexity_mu); }
};

struct AlphaSchedule {
  double growth_factor = 1.1;
  double alpha_max = 1e8;
};

struct ProblemSpec {
  std::vector<BlockSpec> blocks;
  double alpha = 1.0;
  std::optional<AlphaSchedule> alpha_schedule;
  EngineMode mode = EngineMode::constrained;
  /// Reject problems whose descent constants don't certify convergence.
  bool checked = false;
  /// Called after the schedule changes alpha (e.g. proximal weights that
  /// follow the penalty).
  std::function<void(ProblemSpec&, double)> on_alpha_change;
};

struct IterateState {
  std::vector<Matrix> x;
  Matrix p;
  Matrix prev_last_block;
  std::size_t iteration = 0;
  double alpha_current = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(std::string block, const std::string& what)
      : std::runtime_error("block '" + block + "': " + what), block_(std::move(block)) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

class ConstantsUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// shapes

inline Index constraint_rows(const ProblemSpec& spec) {
  if (spec.blocks.empty()) throw ShapeError("problem has no blocks");
  return spec.blocks.front().constraint_matrix.rows();
}

inline void check_spec(const ProblemSpec& spec) {
  const Index m = constraint_rows(spec);
  for (const auto& b : spec.blocks) {
    if (b.constraint_matrix.rows() != m) {
      throw ShapeError("block '" + b.name + "': constraint matrix has " +
                       std::to_string(b.constraint_matrix.rows()) + " rows, expected " +
                       std::to_string(m));
    }
    require_finite(b.constraint_matrix, "block '" + b.name + "' constraint matrix");
    if (!b.objective_value) throw std::invalid_argument("block '" + b.name + "': no objective");
    if (!b.subproblem_solver) throw std::invalid_argument("block '" + b.name + "': no solver");
  }
  if (spec.mode == EngineMode::constrained && !(spec.alpha > 0.0)) {
    throw std::invalid_argument("alpha must be positive");
  }
  if (spec.alpha_schedule && !(spec.alpha_schedule->growth_factor > 1.0)) {
    throw std::invalid_argument("alpha schedule growth factor must exceed 1");
  }
}

inline void check_state(const ProblemSpec& spec, const IterateState& s) {
  if (s.x.size() != spec.blocks.size()) {
    throw ShapeError("state has " + std::to_string(s.x.size()) + " blocks, problem has " +
                     std::to_string(spec.blocks.size()));
  }
  const Index m = constraint_rows(spec);
  const Index c = s.x.front().cols();
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const auto& a = spec.blocks[i].constraint_matrix;
    if (s.x[i].rows() != a.cols() || s.x[i].cols() != c) {
      throw ShapeError("block '" + spec.blocks[i].name + "': iterate is " + shape_string(s.x[i]) +
                       ", expected " + std::to_string(a.cols()) + "x" + std::to_string(c));
    }
  }
  if (s.p.rows() != m || s.p.cols() != c) {
    throw ShapeError("multiplier is " + shape_string(s.p) + ", expected " + std::to_string(m) + "x" +
                     std::to_string(c));
  }
  require_same_shape(s.prev_last_block, s.x.back(), "previous last block");
}

/// Zero multiplier, prev_last_block = x_N, alpha from the spec.
inline IterateState initial_state(const ProblemSpec& spec, std::vector<Matrix> x0) {
  IterateState s;
  s.x = std::move(x0);
  if (s.x.empty()) throw ShapeError("initial state has no blocks");
  s.p = Matrix::Zero(constraint_rows(spec), s.x.front().cols());
  s.prev_last_block = s.x.back();
  s.alpha_current = spec.mode == EngineMode::constrained ? spec.alpha : 0.0;
  check_state(spec, s);
  return s;
}

// ---------------------------------------------------------------------------
// merit functions

inline Matrix constraint_residual(const ProblemSpec& spec, std::span<const Matrix> x) {
  Matrix r = Matrix::Zero(constraint_rows(spec), x.front().cols());
  for (std::size_t i = 0; i < x.size(); ++i) r.noalias() += spec.blocks[i].constraint_matrix * x[i];
  return r;
}

inline double objective_sum(const ProblemSpec& spec, std::span<const Matrix> x) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) f += spec.blocks[i].objective_value(x[i]);
  return f;
}

/// sum f_i + <p, r> + (alpha/2)||r||^2 with r = sum A_i x_i, at the given
/// alpha. Unconstrained mode has no penalty or multiplier: sum f_i.
inline double augmented_lagrangian(const ProblemSpec& spec, const IterateState& s, double alpha) {
  check_state(spec, s);
  const double f = objective_sum(spec, s.x);
  if (spec.mode == EngineMode::unconstrained_badm) return f;
  const Matrix r = constraint_residual(spec, s.x);
  return f + inner(s.p, r) + 0.5 * alpha * r.squaredNorm();
}

inline double augmented_lagrangian(const ProblemSpec& spec, const IterateState& s) {
  return augmented_lagrangian(spec, s, s.alpha_current);
}

/// Alpha-independent ingredients of the descent constants.
///   sigma_c  smallest eigenvalue of A_N A_N^T
///   ell_h    Lipschitz constant of grad f_N
///   ell_phi  Lipschitz constant of grad phi_N
struct DescentConstants {
  double sigma_c = 0.0;
  double ell_h = 0.0;
  double ell_phi = 0.0;
  std::vector<double> moduli;

  double sigma0(double alpha) const { return 2.0 * ell_phi * ell_phi / (alpha * sigma_c); }

  /// 1/2 min(mu_1, ..., mu_{N-1}, mu_N - 4(ell_h+ell_phi)^2/(alpha sigma_c)
  ///                                     - 4 ell_phi^2/(alpha sigma_c))
  double sigma1(double alpha) const {
    const double s = ell_h + ell_phi;
    double last = moduli.back() - 4.0 * s * s / (alpha * sigma_c) - 4.0 * ell_phi * ell_phi / (alpha * sigma_c);
    double m = last;
    for (std::size_t i = 0; i + 1 < moduli.size(); ++i) m = std::min(m, moduli[i]);
    return 0.5 * m;
  }

  /// Smallest alpha with sigma1's last term positive:
  /// 4[(ell_h+ell_phi)^2 + ell_phi^2] / (mu_N sigma_c). Infinite when mu_N = 0.
  double alpha_threshold() const {
    const double s = ell_h + ell_phi;
    const double num = 4.0 * (s * s + ell_phi * ell_phi);
    if (num == 0.0) return 0.0;
    if (!(moduli.back() > 0.0)) return std::numeric_limits<double>::infinity();
    return num / (moduli.back() * sigma_c);
  }
};

inline DescentConstants descent_constants(const ProblemSpec& spec) {
  if (spec.blocks.empty()) throw ShapeError("problem has no blocks");
  const BlockSpec& last = spec.blocks.back();
  DescentConstants c;
  c.sigma_c = spectral_norm_lower_bound(last.constraint_matrix);
  if (!(c.sigma_c > 0.0)) {
    throw ConstantsUnavailable("last block '" + last.name +
                               "': constraint matrix is not full row rank (sigma_C = 0)");
  }
  if (!last.objective_smooth_lipschitz) {
    throw ConstantsUnavailable("last block '" + last.name + "': gradient Lipschitz constant not given");
  }
  if (!last.bregman.constants_available) {
    throw ConstantsUnavailable("last block '" + last.name + "': Bregman generator " + last.bregman.name +
                               " has no global smoothness constant");
  }
  c.ell_h = *last.objective_smooth_lipschitz;
  c.ell_phi = last.bregman.grad_lipschitz_ell;
  for (const auto& b : spec.blocks) c.moduli.push_back(b.modulus());
  return c;
}

struct SigmaConstants {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
};

/// sigma0, sigma1 at the spec's alpha.
inline SigmaConstants sigma_constants(const ProblemSpec& spec, double alpha) {
  const DescentConstants c = descent_constants(spec);
  return {c.sigma0(alpha), c.sigma1(alpha)};
}

inline SigmaConstants sigma_constants(const ProblemSpec& spec) { return sigma_constants(spec, spec.alpha); }

/// L_alpha + sigma0 ||x_N - prev_last_block||^2.
inline double merit_lhat(const ProblemSpec& spec, const IterateState& s, double alpha) {
  const double sigma0 = descent_constants(spec).sigma0(alpha);
  return augmented_lagrangian(spec, s, alpha) + sigma0 * (s.x.back() - s.prev_last_block).squaredNorm();
}

inline double merit_lhat(const ProblemSpec& spec, const IterateState& s) {
  return merit_lhat(spec, s, s.alpha_current);
}

/// sqrt(sum ||x_i' - x_i||^2) / (sqrt(sum ||x_i||^2) + 1)
inline double relchg(const IterateState& prev, const IterateState& next) {
  if (prev.x.size() != next.x.size()) throw ShapeError("relchg: block counts differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < prev.x.size(); ++i) {
    require_same_shape(prev.x[i], next.x[i], "relchg");
    num += (next.x[i] - prev.x[i]).squaredNorm();
    den += prev.x[i].squaredNorm();
  }
  return std::sqrt(num) / (std::sqrt(den) + 1.0);
}

// ---------------------------------------------------------------------------
// block subproblems

/// The function `subproblem_solver` must minimize.
inline double block_subproblem_objective(const ProblemSpec& spec, const SubproblemInput& in,
                                         const Matrix& x) {
  const BlockSpec& b = spec.blocks[in.block];
  double v = b.objective_value(x) + distance(in.bregman, x, in.current);
  if (in.mode == EngineMode::constrained) {
    const Matrix ax = b.constraint_matrix * x;
    v += inner(in.multiplier, ax) + 0.5 * in.alpha * (ax + in.rest).squaredNorm();
  }
  return v;
}

/// Outcome of perturbing a solver's answer. `worst_decrease` is the largest
/// F(x*) - F(x* + d) seen, relative to 1 + |F(x*)|.
struct AuditResult {
  double value = 0.0;
  double worst_decrease = -std::numeric_limits<double>::infinity();
  bool passed = true;
};

/// Perturbs `x` in `directions` random directions at step sizes 1e-2, 1e-4,
/// 1e-6 (relative to 1 + ||x||) and reports whether any of them lowers the
/// subproblem objective by more than tol * (1 + |F(x)|). Perturbations that
/// leave the Bregman domain are skipped.
inline AuditResult audit_minimizer(const ProblemSpec& spec, const SubproblemInput& in, const Matrix& x,
                                   Rng& rng, int directions = 10, double tol = 1e-9) {
  AuditResult r;
  r.value = block_subproblem_objective(spec, in, x);
  const double scale = 1.0 + x.norm();
  for (int d = 0; d < directions; ++d) {
    Matrix dir = rng.gaussian_matrix(x.rows(), x.cols());
    dir /= dir.norm();
    for (double h : {1e-2, 1e-4, 1e-6}) {
      const Matrix y = x + (h * scale) * dir;
      if (!in.bregman.in_domain(y)) continue;
      const double drop = (r.value - block_subproblem_objective(spec, in, y)) / (1.0 + std::abs(r.value));
      r.worst_decrease = std::max(r.worst_decrease, drop);
      if (drop > tol) r.passed = false;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// stationarity

/// Per-block dual residuals of the step prev -> next: the difference between
/// the subproblem optimality condition and the full optimality condition,
///
///   A_i^T (p' - p) + alpha A_i^T sum_{j>i} A_j (x_j' - x_j) + grad phi_i(x_i) - grad phi_i(x_i')
///
/// plus 2 sigma0 (x_N' - x_N) for the last block (when sigma0 is computable).
/// Together with the primal residual sum A_i x_i' these vanish exactly at a
/// stationary point. alpha is the one that produced `next`.
struct StationarityResidual {
  std::vector<double> block;
  double primal = 0.0;

  double max_dual() const {
    double m = 0.0;
    for (double v : block) m = std::max(m, v);
    return m;
  }
};

inline StationarityResidual stationarity_residual(const ProblemSpec& spec, const IterateState& next,
                                                  const IterateState& prev) {
  check_state(spec, next);
  check_state(spec, prev);
  const std::size_t n = spec.blocks.size();
  const double alpha = prev.alpha_current;
  const bool constrained = spec.mode == EngineMode::constrained;

  StationarityResidual out;
  out.block.resize(n);
  const Matrix dp = next.p - prev.p;

  // tail = sum_{j>i} A_j (x_j' - x_j), accumulated from the back.
  Matrix tail = Matrix::Zero(dp.rows(), dp.cols());
  double sigma0 = 0.0;
  if (constrained) {
    try {
      sigma0 = descent_constants(spec).sigma0(alpha);
    } catch (const ConstantsUnavailable&) {
      sigma0 = 0.0;
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    const BlockSpec& b = spec.blocks[k];
    Matrix r = b.bregman.grad_phi(prev.x[k]) - b.bregman.grad_phi(next.x[k]);
    if (constrained) {
      r.noalias() += b.constraint_matrix.transpose() * (dp + alpha * tail);
      tail.noalias() += b.constraint_matrix * (next.x[k] - prev.x[k]);
      if (k + 1 == n) r += 2.0 * sigma0 * (next.x[k] - prev.x[k]);
    }
    out.block[k] = r.norm();
  }
  out.primal = constrained ? constraint_residual(spec, next.x).norm() : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// one step

struct StepOptions {
  /// When set, every solver answer is perturbation-audited and a failing
  /// audit raises SolverError.
  Rng* audit_rng = nullptr;
  double audit_tol = 1e-9;
};

struct StepOutcome {
  IterateState state;
  StepRecord record;
};

inline StepOutcome step(const ProblemSpec& spec, const IterateState& s, const StepOptions& opt = {}) {
  check_state(spec, s);
  const std::size_t n = spec.blocks.size();
  const bool constrained = spec.mode == EngineMode::constrained;
  const double alpha = constrained ? s.alpha_current : 0.0;

  std::vector<Matrix> x = s.x;
  std::vector<Matrix> ax(n);
  for (std::size_t i = 0; i < n; ++i) ax[i] = spec.blocks[i].constraint_matrix * x[i];
  const Matrix zero_rows = Matrix::Zero(s.p.rows(), s.p.cols());

  for (std::size_t i = 0; i < n; ++i) {
    const BlockSpec& b = spec.blocks[i];
    Matrix rest = Matrix::Zero(s.p.rows(), s.p.cols());
    if (constrained) {
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) rest += ax[j];
    }
    const Matrix current = x[i];
    const SubproblemInput in{i,     std::span<const Matrix>(x), current, rest, constrained ? s.p : zero_rows,
                             alpha, b.bregman,                  spec.mode};
    Matrix xi;
    try {
      xi = b.subproblem_solver(in);
    } catch (const SolverError&) {
      throw;
    } catch (const std::exception& e) {
      throw SolverError(b.name, e.what());
    }
    if (xi.rows() != current.rows() || xi.cols() != current.cols()) {
      throw SolverError(b.name, "solver returned " + shape_string(xi) + ", expected " + shape_string(current));
    }
    if (!all_finite(xi)) throw SolverError(b.name, "solver returned non-finite values");
    if (opt.audit_rng) {
      const AuditResult a = audit_minimizer(spec, in, xi, *opt.audit_rng, 10, opt.audit_tol);
      if (!a.passed) {
        throw SolverError(b.name, "audit: perturbation lowers the subproblem objective by " +
                                      format_double(a.worst_decrease) + " (relative)");
      }
    }
    x[i] = std::move(xi);
    ax[i] = b.constraint_matrix * x[i];
  }

  StepOutcome out;
  IterateState& t = out.state;
  t.x = std::move(x);
  t.prev_last_block = s.x.back();
  t.iteration = s.iteration + 1;
  t.alpha_current = s.alpha_current;
  Matrix r = Matrix::Zero(s.p.rows(), s.p.cols());
  for (const auto& v : ax) r += v;
  t.p = constrained ? Matrix(s.p + alpha * r) : s.p;

  StepRecord& rec = out.record;
  rec.iteration = t.iteration;
  rec.alpha = alpha;
  rec.objective = objective_sum(spec, t.x);
  rec.lagrangian = constrained ? rec.objective + inner(t.p, r) + 0.5 * alpha * r.squaredNorm() : rec.objective;
  rec.primal_residual = constrained ? r.norm() : 0.0;
  rec.multiplier_step = (t.p - s.p).norm();
  rec.block_steps.resize(n);
  for (std::size_t i = 0; i < n; ++i) rec.block_steps[i] = (t.x[i] - s.x[i]).norm();
  rec.prev_last_step = (s.x.back() - s.prev_last_block).norm();
  rec.relchg = relchg(s, t);
  if (constrained) {
    try {
      const double sigma0 = descent_constants(spec).sigma0(alpha);
      rec.lhat = rec.lagrangian + sigma0 * rec.block_steps.back() * rec.block_steps.back();
      rec.lhat_prev = augmented_lagrangian(spec, s, alpha) + sigma0 * rec.prev_last_step * rec.prev_last_step;
    } catch (const ConstantsUnavailable&) {
    }
  } else {
    // Without coupling the merit is the plain objective.
    rec.lhat = rec.objective;
    rec.lhat_prev = objective_sum(spec, s.x);
  }
  rec.stationarity_residual = stationarity_residual(spec, t, s).max_dual();
  return out;
}

// ---------------------------------------------------------------------------
// run

struct StoppingRule {
  double relchg_threshold = 1e-8;
  std::size_t max_iterations = 5000;
  /// Also stop once ||sum A_i x_i|| falls to this level.
  std::optional<double> primal_tolerance;
};

struct RunOptions {
  /// Ground truth per block for relErr; empty entries (size 0) are skipped.
  std::vector<Matrix> truth;
  bool solver_audit = false;
  std::uint64_t audit_seed = 0;
  std::function<void(const IterateState&, const StepRecord&)> observer;
};

enum class RunStatus { converged, iteration_cap, solver_failure };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged:
      return "converged";
    case RunStatus::iteration_cap:
      return "iteration_cap";
    case RunStatus::solver_failure:
      return "solver_failure";
  }
  return "?";
}

struct RunResult {
  IterateState final_state;
  Trace trace;
  RunStatus status = RunStatus::iteration_cap;
  std::string message;
};

/// ||estimate - truth||_F / ||truth||_F
inline double relerr(const Matrix& estimate, const Matrix& truth) {
  require_same_shape(estimate, truth, "relerr");
  const double t = truth.norm();
  if (!(t > 0.0)) throw std::invalid_argument("relerr: ground truth has zero norm");
  return (estimate - truth).norm() / t;
}

/// Advance alpha by the schedule. Returns true when it changed.
inline bool advance_alpha(ProblemSpec& spec, IterateState& s) {
  if (!spec.alpha_schedule || spec.mode != EngineMode::constrained) return false;
  const double next = std::min(s.alpha_current * spec.alpha_schedule->growth_factor, spec.alpha_schedule->alpha_max);
  if (next == s.alpha_current) return false;
  s.alpha_current = next;
  if (spec.on_alpha_change) spec.on_alpha_change(spec, next);
  return true;
}

/// In checked mode, throws ValidationError unless every block modulus is
/// positive and (for fixed alpha) sigma1 > 0.
inline void require_certified(const ProblemSpec& spec) {
  DescentConstants c;
  try {
    c = descent_constants(spec);
  } catch (const ConstantsUnavailable& e) {
    throw ValidationError(std::string("checked mode: ") + e.what());
  }
  for (std::size_t i = 0; i < c.moduli.size(); ++i) {
    if (!(c.moduli[i] > 0.0)) {
      throw ValidationError("checked mode: block '" + spec.blocks[i].name + "' has no strong convexity");
    }
  }
  if (spec.mode == EngineMode::constrained && !spec.alpha_schedule && !(c.sigma1(spec.alpha) > 0.0)) {
    throw ValidationError("checked mode: alpha = " + format_double(spec.alpha) +
                          " does not exceed the threshold " + format_double(c.alpha_threshold()));
  }
}

/// Iterates until relChg < threshold or the cap. The alpha schedule, when
/// present, is applied after every step. A solver failure stops the run with
/// the trace so far.
inline RunResult run(ProblemSpec spec, IterateState init, const StoppingRule& stop, const RunOptions& opt = {}) {
  check_spec(spec);
  check_state(spec, init);
  if (spec.checked) require_certified(spec);

  RunResult res;
  for (const auto& b : spec.blocks) res.trace.block_names.push_back(b.name);
  res.final_state = std::move(init);

  std::optional<Rng> audit_rng;
  StepOptions sopt;
  if (opt.solver_audit) {
    audit_rng.emplace(opt.audit_seed);
    sopt.audit_rng = &*audit_rng;
  }

  for (std::size_t k = 0; k < stop.max_iterations; ++k) {
    StepOutcome o;
    try {
      o = step(spec, res.final_state, sopt);
    } catch (const SolverError& e) {
      res.status = RunStatus::solver_failure;
      res.message = e.what();
      return res;
    }
    o.record.relerr.assign(spec.blocks.size(), kNaN);
    for (std::size_t i = 0; i < opt.truth.size() && i < spec.blocks.size(); ++i) {
      if (opt.truth[i].size() > 0) o.record.relerr[i] = relerr(o.state.x[i], opt.truth[i]);
    }
    advance_alpha(spec, o.state);
    if (opt.observer) opt.observer(o.state, o.record);
    res.trace.records.push_back(o.record);
    res.final_state = std::move(o.state);
    if (o.record.relchg < stop.relchg_threshold ||
        (stop.primal_tolerance && o.record.primal_residual <= *stop.primal_tolerance)) {
      res.status = RunStatus::converged;
      return res;
    }
  }
  res.status = RunStatus::iteration_cap;
  return res;
}

}  // namespace badmm

#endif  // BADMM_ENGINE_HPP_
