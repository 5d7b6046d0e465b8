#ifndef BADMM_RPCA_HPP_
#define BADMM_RPCA_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "badmm/engine.hpp"
#include "badmm/prox.hpp"

namespace badmm {

// Low-rank + sparse + noise decomposition
//
//   min ||L||_* + lambda ||S||_{1/2}^{1/2} + (mu/2) ||T - M||_F^2   s.t.  T = L + S
//
// with blocks (L, S, T), constraint -L - S + T = 0 and proximal weights
// gamma1 (L and S) and gamma2 (T).

struct RpcaConfig {
  /// Unset: lambda_scale / max(m, n).
  std::optional<double> lambda;
  double lambda_scale = 60.0;
  double mu = 1e4;
  /// Unset: follow the penalty, gamma1 = alpha and gamma2 = alpha + mu, at
  /// every iteration.
  std::optional<double> gamma1;
  std::optional<double> gamma2;
  double alpha0 = 1e-3;
  bool dynamic_alpha = true;
  double alpha_growth = 1.1;
  double alpha_max = 1e8;
  double init_rank_fraction = 0.01;
  double relchg_threshold = 1e-8;
  std::size_t max_iterations = 5000;

  double lambda_for(Index m, Index n) const { return lambda ? *lambda : lambda_scale / static_cast<double>(std::max(m, n)); }
  double gamma1_at(double alpha) const { return gamma1 ? *gamma1 : alpha; }
  double gamma2_at(double alpha) const { return gamma2 ? *gamma2 : alpha + mu; }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
    };
    if (lambda) positive(*lambda, "lambda");
    positive(lambda_scale, "lambda_scale");
    positive(mu, "mu");
    positive(alpha0, "alpha0");
    if (gamma1 && !(*gamma1 >= 0.0)) throw std::invalid_argument("gamma1 must be nonnegative");
    if (gamma2 && !(*gamma2 >= 0.0)) throw std::invalid_argument("gamma2 must be nonnegative");
    if (dynamic_alpha && !(alpha_growth > 1.0)) throw std::invalid_argument("alpha_growth must exceed 1");
    if (dynamic_alpha && !(alpha_max >= alpha0)) throw std::invalid_argument("alpha_max must be at least alpha0");
    if (!(init_rank_fraction > 0.0 && init_rank_fraction <= 1.0)) {
      throw std::invalid_argument("init_rank_fraction must lie in (0, 1]");
    }
    if (!(relchg_threshold >= 0.0)) throw std::invalid_argument("relchg_threshold must be nonnegative");
  }
};

struct RpcaState {
  Matrix l, s, t, p;
  Matrix prev_t;
  double alpha_current = 0.0;
  std::size_t iteration = 0;
};

struct RpcaTruth {
  Matrix l, s;
};

inline Index rpca_init_rank(const RpcaConfig& cfg, Index m, Index n) {
  const double r = std::ceil(cfg.init_rank_fraction * static_cast<double>(std::min(m, n)) - 1e-12);
  return std::clamp<Index>(static_cast<Index>(r), 1, std::min(m, n));
}

/// L = best rank-r approximation of M, S = 0, T = L, p = 0.
inline RpcaState rpca_init(const Matrix& m_obs, const RpcaConfig& cfg) {
  require_finite(m_obs, "observation");
  RpcaState st;
  st.l = truncated_svd(m_obs, rpca_init_rank(cfg, m_obs.rows(), m_obs.cols()));
  st.s = Matrix::Zero(m_obs.rows(), m_obs.cols());
  st.t = st.l;
  st.p = Matrix::Zero(m_obs.rows(), m_obs.cols());
  st.prev_t = st.t;
  st.alpha_current = cfg.alpha0;
  return st;
}

inline double rpca_objective(const Matrix& l, const Matrix& s, const Matrix& t, const Matrix& m_obs,
                             const RpcaConfig& cfg) {
  return nuclear_norm(l) + cfg.lambda_for(m_obs.rows(), m_obs.cols()) * half_quasi_norm(s) +
         0.5 * cfg.mu * (t - m_obs).squaredNorm();
}

namespace detail {

// SVT that also hands back the nuclear norm of the result.
inline Matrix svt_norm(const Matrix& m, double tau, double& nuclear) {
  const SvdResult f = svd(m);
  Index k = 0;
  nuclear = 0.0;
  Eigen::VectorXd shrunk(f.singular_values.size());
  for (Index i = 0; i < shrunk.size(); ++i) {
    shrunk(i) = soft_shrink(f.singular_values(i), tau);
    if (shrunk(i) > 0.0) {
      k = i + 1;
      nuclear += shrunk(i);
    }
  }
  if (k == 0) return Matrix::Zero(m.rows(), m.cols());
  return f.u.leftCols(k) * shrunk.head(k).asDiagonal() * f.vt.topRows(k);
}

// The three closed-form block updates. `anchor_rest` is what the block is
// pulled towards by the penalty (T - S for L, T - L for S, L + S for T).

inline Matrix rpca_update_l(const Matrix& anchor_rest, const Matrix& p, const Matrix& l_k, double alpha,
                            double gamma1, double* nuclear = nullptr) {
  const double w = alpha + gamma1;
  const Matrix target = (alpha * anchor_rest + p + gamma1 * l_k) / w;
  double nn = 0.0;
  Matrix out = svt_norm(target, 1.0 / w, nn);
  if (nuclear) *nuclear = nn;
  return out;
}

inline Matrix rpca_update_s(const Matrix& anchor_rest, const Matrix& p, const Matrix& s_k, double alpha,
                            double gamma1, double lambda) {
  const double w = alpha + gamma1;
  return half_shrink_matrix((alpha * anchor_rest + p + gamma1 * s_k) / w, lambda / w);
}

inline Matrix rpca_update_t(const Matrix& anchor_rest, const Matrix& p, const Matrix& t_k, const Matrix& m_obs,
                            double alpha, double gamma2, double mu) {
  return (mu * m_obs + alpha * anchor_rest - p + gamma2 * t_k) / (mu + alpha + gamma2);
}

inline BregmanDistance prox_weight(double gamma) { return gamma > 0.0 ? squared_euclidean(gamma) : no_bregman(); }

}  // namespace detail

/// One sweep L -> S -> T -> p, then the penalty schedule.
inline RpcaState rpca_step(const RpcaState& st, const RpcaConfig& cfg, const Matrix& m_obs) {
  const double a = st.alpha_current;
  const double g1 = cfg.gamma1_at(a);
  const double g2 = cfg.gamma2_at(a);
  const double lambda = cfg.lambda_for(m_obs.rows(), m_obs.cols());
  RpcaState nx;
  nx.l = detail::rpca_update_l(st.t - st.s, st.p, st.l, a, g1);
  nx.s = detail::rpca_update_s(st.t - nx.l, st.p, st.s, a, g1, lambda);
  nx.t = detail::rpca_update_t(nx.l + nx.s, st.p, st.t, m_obs, a, g2, cfg.mu);
  nx.p = st.p + a * (nx.t - nx.l - nx.s);
  nx.prev_t = st.t;
  nx.iteration = st.iteration + 1;
  nx.alpha_current = cfg.dynamic_alpha ? std::min(a * cfg.alpha_growth, cfg.alpha_max) : a;
  return nx;
}

/// The same model as an engine problem. Block order L, S, T with
/// A_L = A_S = -I and A_T = I (the constraint written as T - L - S = 0).
inline ProblemSpec rpca_problem_spec(const Matrix& m_obs, const RpcaConfig& cfg) {
  cfg.validate();
  require_finite(m_obs, "observation");
  const Index m = m_obs.rows();
  const double lambda = cfg.lambda_for(m, m_obs.cols());
  const double mu = cfg.mu;
  const Matrix eye = Matrix::Identity(m, m);

  auto gamma_of = [](const SubproblemInput& in) { return in.bregman.strong_convexity_mu; };

  ProblemSpec spec;
  spec.alpha = cfg.alpha0;
  if (cfg.dynamic_alpha) spec.alpha_schedule = AlphaSchedule{cfg.alpha_growth, cfg.alpha_max};

  BlockSpec bl;
  bl.name = "L";
  bl.constraint_matrix = -eye;
  bl.objective_value = [](const Matrix& x) { return nuclear_norm(x); };
  bl.bregman = detail::prox_weight(cfg.gamma1_at(cfg.alpha0));
  bl.subproblem_solver = [gamma_of](const SubproblemInput& in) {
    // rest = T - S  (= A_S S + A_T T)
    return detail::rpca_update_l(in.rest, in.multiplier, in.current, in.alpha, gamma_of(in));
  };

  BlockSpec bs;
  bs.name = "S";
  bs.constraint_matrix = -eye;
  bs.objective_value = [lambda](const Matrix& x) { return lambda * half_quasi_norm(x); };
  bs.bregman = detail::prox_weight(cfg.gamma1_at(cfg.alpha0));
  bs.subproblem_solver = [gamma_of, lambda](const SubproblemInput& in) {
    return detail::rpca_update_s(in.rest, in.multiplier, in.current, in.alpha, gamma_of(in), lambda);
  };

  BlockSpec bt;
  bt.name = "T";
  bt.constraint_matrix = eye;
  bt.objective_value = [m_obs, mu](const Matrix& x) { return 0.5 * mu * (x - m_obs).squaredNorm(); };
  bt.bregman = detail::prox_weight(cfg.gamma2_at(cfg.alpha0));
  bt.objective_smooth_lipschitz = mu;
  bt.objective_strong_convexity = mu;
  bt.subproblem_solver = [gamma_of, m_obs, mu](const SubproblemInput& in) {
    // rest = -L - S
    return detail::rpca_update_t(-in.rest, in.multiplier, in.current, m_obs, in.alpha, gamma_of(in), mu);
  };

  spec.blocks = {std::move(bl), std::move(bs), std::move(bt)};
  if (!cfg.gamma1 || !cfg.gamma2) {
    spec.on_alpha_change = [cfg](ProblemSpec& sp, double alpha) {
      if (!cfg.gamma1) {
        sp.blocks[0].bregman = detail::prox_weight(cfg.gamma1_at(alpha));
        sp.blocks[1].bregman = detail::prox_weight(cfg.gamma1_at(alpha));
      }
      if (!cfg.gamma2) sp.blocks[2].bregman = detail::prox_weight(cfg.gamma2_at(alpha));
    };
  }
  return spec;
}

/// Descent constants of the engine mapping at penalty alpha, without
/// building it: sigma_C = 1 (A_T = I), ell_h = mu, ell_phi = gamma2, moduli
/// (gamma1, gamma1, max(mu, gamma2)).
inline DescentConstants rpca_descent_constants(const RpcaConfig& cfg, double alpha) {
  DescentConstants c;
  c.sigma_c = 1.0;
  c.ell_h = cfg.mu;
  c.ell_phi = cfg.gamma2_at(alpha);
  c.moduli = {cfg.gamma1_at(alpha), cfg.gamma1_at(alpha), std::max(cfg.mu, cfg.gamma2_at(alpha))};
  return c;
}

inline IterateState to_engine_state(const RpcaState& st) {
  IterateState s;
  s.x = {st.l, st.s, st.t};
  s.p = st.p;
  s.prev_last_block = st.prev_t;
  s.iteration = st.iteration;
  s.alpha_current = st.alpha_current;
  return s;
}

inline RpcaState from_engine_state(const IterateState& s) {
  RpcaState st;
  st.l = s.x.at(0);
  st.s = s.x.at(1);
  st.t = s.x.at(2);
  st.p = s.p;
  st.prev_t = s.prev_last_block;
  st.iteration = s.iteration;
  st.alpha_current = s.alpha_current;
  return st;
}

struct RpcaResult {
  RpcaState state;
  Trace trace;
  RunStatus status = RunStatus::iteration_cap;
};

inline std::map<std::string, std::string> rpca_header(const Matrix& m_obs, const RpcaConfig& cfg) {
  return {{"m", std::to_string(m_obs.rows())},
          {"n", std::to_string(m_obs.cols())},
          {"lambda", format_double(cfg.lambda_for(m_obs.rows(), m_obs.cols()))},
          {"mu", format_double(cfg.mu)},
          {"gamma1", cfg.gamma1 ? format_double(*cfg.gamma1) : "alpha"},
          {"gamma2", cfg.gamma2 ? format_double(*cfg.gamma2) : "alpha+mu"},
          {"alpha0", format_double(cfg.alpha0)},
          {"alpha_schedule", cfg.dynamic_alpha ? "min(alpha*" + format_double(cfg.alpha_growth) + "," +
                                                     format_double(cfg.alpha_max) + ")"
                                               : "fixed"},
          {"init_rank", std::to_string(rpca_init_rank(cfg, m_obs.rows(), m_obs.cols()))},
          {"relchg_threshold", format_double(cfg.relchg_threshold)}};
}

/// Fused solver: rpca_init, then rpca_step until relChg < threshold or the
/// iteration cap. Each trace record carries the same quantities as a generic
/// engine step record.
inline RpcaResult rpca_solve(const Matrix& m_obs, const RpcaConfig& cfg, const RpcaTruth* truth = nullptr,
                             const std::map<std::string, std::string>& extra_header = {}) {
  cfg.validate();
  RpcaResult res;
  res.trace.block_names = {"L", "S", "T"};
  res.trace.header = rpca_header(m_obs, cfg);
  for (const auto& [k, v] : extra_header) res.trace.header[k] = v;

  RpcaState st = rpca_init(m_obs, cfg);
  const double lambda = cfg.lambda_for(m_obs.rows(), m_obs.cols());
  std::optional<Matrix> truth_t;
  if (truth) {
    require_same_shape(truth->l, m_obs, "ground-truth L");
    require_same_shape(truth->s, m_obs, "ground-truth S");
    truth_t = truth->l + truth->s;
  }

  // f and r = T - L - S at the current state, carried forward.
  double f_prev = rpca_objective(st.l, st.s, st.t, m_obs, cfg);

  for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
    const double a = st.alpha_current;
    const double g1 = cfg.gamma1_at(a);
    const double g2 = cfg.gamma2_at(a);
    double nuclear = 0.0;
    RpcaState nx;
    nx.l = detail::rpca_update_l(st.t - st.s, st.p, st.l, a, g1, &nuclear);
    nx.s = detail::rpca_update_s(st.t - nx.l, st.p, st.s, a, g1, lambda);
    nx.t = detail::rpca_update_t(nx.l + nx.s, st.p, st.t, m_obs, a, g2, cfg.mu);
    const Matrix r = nx.t - nx.l - nx.s;
    nx.p = st.p + a * r;
    nx.prev_t = st.t;
    nx.iteration = st.iteration + 1;
    nx.alpha_current = cfg.dynamic_alpha ? std::min(a * cfg.alpha_growth, cfg.alpha_max) : a;

    StepRecord rec;
    rec.iteration = nx.iteration;
    rec.alpha = a;
    rec.objective = nuclear + lambda * half_quasi_norm(nx.s) + 0.5 * cfg.mu * (nx.t - m_obs).squaredNorm();
    rec.lagrangian = rec.objective + inner(nx.p, r) + 0.5 * a * r.squaredNorm();
    const Matrix dl = nx.l - st.l;
    const Matrix ds = nx.s - st.s;
    const Matrix dt = nx.t - st.t;
    const Matrix dp = nx.p - st.p;
    rec.block_steps = {dl.norm(), ds.norm(), dt.norm()};
    rec.prev_last_step = (st.t - st.prev_t).norm();
    // sigma_C = 1 and ell_phi = gamma2 for this model.
    const double sigma0 = 2.0 * g2 * g2 / a;
    const Matrix r_prev = st.t - st.l - st.s;
    rec.lhat = rec.lagrangian + sigma0 * rec.block_steps[2] * rec.block_steps[2];
    rec.lhat_prev = f_prev + inner(st.p, r_prev) + 0.5 * a * r_prev.squaredNorm() +
                    sigma0 * rec.prev_last_step * rec.prev_last_step;
    rec.primal_residual = r.norm();
    rec.multiplier_step = dp.norm();
    const double num = std::sqrt(dl.squaredNorm() + ds.squaredNorm() + dt.squaredNorm());
    const double den = std::sqrt(st.l.squaredNorm() + st.s.squaredNorm() + st.t.squaredNorm()) + 1.0;
    rec.relchg = num / den;
    // Dual residuals of the three blocks (see stationarity_residual).
    const double res_l = (-dp + a * (ds - dt) - g1 * dl).norm();
    const double res_s = (-dp - a * dt - g1 * ds).norm();
    const double res_t = (dp + (2.0 * sigma0 - g2) * dt).norm();
    rec.stationarity_residual = std::max({res_l, res_s, res_t});
    rec.relerr.assign(3, kNaN);
    if (truth) {
      rec.relerr[0] = relerr(nx.l, truth->l);
      if (truth->s.norm() > 0.0) rec.relerr[1] = relerr(nx.s, truth->s);
      rec.relerr[2] = relerr(nx.t, *truth_t);
    }
    res.trace.records.push_back(rec);

    f_prev = rec.objective;
    st = std::move(nx);
    if (rec.relchg < cfg.relchg_threshold) {
      res.status = RunStatus::converged;
      res.state = std::move(st);
      return res;
    }
  }
  res.status = RunStatus::iteration_cap;
  res.state = std::move(st);
  return res;
}

}  // namespace badmm

#endif  // BADMM_RPCA_HPP_
