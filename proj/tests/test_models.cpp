#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "badmm/datagen.hpp"
#include "badmm/linear_system.hpp"
#include "badmm/rpca.hpp"
#include "badmm/validation.hpp"

using namespace badmm;

namespace {

RpcaConfig small_config() {
  RpcaConfig cfg;
  cfg.max_iterations = 30;
  return cfg;
}

SyntheticInstance small_instance(std::uint64_t seed, double sigma = 0.0) {
  InstanceParams p;
  p.m = 20;
  p.n = 16;
  p.rank = 2;
  p.sparsity = 0.05;
  p.magnitude = 10.0;
  p.sigma = sigma;
  p.seed = seed;
  return gen_instance(p);
}

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(RpcaInit, RankFromFraction) {
  RpcaConfig cfg;
  EXPECT_EQ(rpca_init_rank(cfg, 200, 200), 2);
  EXPECT_EQ(rpca_init_rank(cfg, 20, 16), 1);
  cfg.init_rank_fraction = 1.0;
  EXPECT_EQ(rpca_init_rank(cfg, 7, 5), 5);
  const auto inst = small_instance(1);
  cfg.init_rank_fraction = 0.2;  // rank ceil(3.2) = 4
  const RpcaState st = rpca_init(inst.m_obs, cfg);
  const auto sv = svd(st.l).singular_values;
  EXPECT_GT(sv(3), 1e-8 * sv(0));
  EXPECT_LT(sv(4), 1e-10 * sv(0));
  EXPECT_EQ(st.s, Matrix::Zero(20, 16));
  EXPECT_EQ(st.t, st.l);
  EXPECT_EQ(st.p, Matrix::Zero(20, 16));
}

TEST(RpcaConfig, Validation) {
  RpcaConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.mu = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = RpcaConfig{};
  cfg.alpha_growth = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.dynamic_alpha = false;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(RpcaConfig{}.lambda_for(200, 100), 0.3);
}

TEST(RpcaStep, ZeroObservationIsFixed) {
  const Matrix zero = Matrix::Zero(6, 5);
  const RpcaConfig cfg = small_config();
  RpcaState st = rpca_init(zero, cfg);
  for (int k = 0; k < 10; ++k) {
    st = rpca_step(st, cfg, zero);
    EXPECT_EQ(st.l, zero);
    EXPECT_EQ(st.s, zero);
    EXPECT_EQ(st.t, zero);
    EXPECT_EQ(st.p, zero);
  }
  const auto res = rpca_solve(zero, cfg);
  EXPECT_EQ(res.status, RunStatus::converged);
  EXPECT_EQ(res.trace.size(), 1u);
}

TEST(RpcaStep, AlphaSchedule) {
  const auto inst = small_instance(2);
  RpcaConfig cfg = small_config();
  cfg.alpha0 = 1.0;
  cfg.alpha_max = 1.3;
  RpcaState st = rpca_init(inst.m_obs, cfg);
  st = rpca_step(st, cfg, inst.m_obs);
  EXPECT_DOUBLE_EQ(st.alpha_current, 1.1);
  st = rpca_step(st, cfg, inst.m_obs);
  st = rpca_step(st, cfg, inst.m_obs);
  EXPECT_EQ(st.alpha_current, 1.3);
  EXPECT_EQ(rpca_step(st, cfg, inst.m_obs).alpha_current, 1.3);
  cfg.dynamic_alpha = false;
  cfg.alpha_max = 2.0;
  EXPECT_EQ(rpca_step(st, cfg, inst.m_obs).alpha_current, 1.3);
}

TEST(RpcaStep, FusedMatchesEngine) {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto inst = small_instance(seed, 0.1);
    for (bool fixed_gamma : {false, true}) {
      RpcaConfig cfg = small_config();
      cfg.alpha0 = 0.5;
      if (fixed_gamma) {
        cfg.gamma1 = 2.0;
        cfg.gamma2 = 0.0;
      }
      const ProblemSpec spec = rpca_problem_spec(inst.m_obs, cfg);
      RpcaState fused = rpca_init(inst.m_obs, cfg);
      StoppingRule stop;
      stop.relchg_threshold = 0;
      stop.max_iterations = 20;
      const auto generic = run(spec, to_engine_state(fused), stop);
      const auto direct = rpca_solve(inst.m_obs, [&] {
        RpcaConfig c = cfg;
        c.relchg_threshold = 0;
        c.max_iterations = 20;
        return c;
      }());
      ASSERT_EQ(generic.trace.size(), 20u);
      ASSERT_EQ(direct.trace.size(), 20u);
      for (int k = 0; k < 20; ++k) fused = rpca_step(fused, cfg, inst.m_obs);
      const RpcaState eng = from_engine_state(generic.final_state);
      const double scale = 1.0 + inst.m_obs.cwiseAbs().maxCoeff();
      EXPECT_LE(max_diff(eng.l, fused.l), 1e-10 * scale);
      EXPECT_LE(max_diff(eng.s, fused.s), 1e-10 * scale);
      EXPECT_LE(max_diff(eng.t, fused.t), 1e-10 * scale);
      EXPECT_LE(max_diff(eng.p, fused.p), 1e-10 * (1.0 + fused.p.cwiseAbs().maxCoeff()));
      EXPECT_EQ(direct.state.l, fused.l);
      EXPECT_EQ(eng.alpha_current, fused.alpha_current);
      for (std::size_t k = 0; k < 20; ++k) {
        const auto& a = generic.trace.records[k];
        const auto& b = direct.trace.records[k];
        const double tol = 1e-8 * (1.0 + std::abs(a.lhat));
        EXPECT_NEAR(a.lhat, b.lhat, tol) << k;
        EXPECT_NEAR(a.lhat_prev, b.lhat_prev, tol) << k;
        EXPECT_NEAR(a.objective, b.objective, tol) << k;
        EXPECT_NEAR(a.relchg, b.relchg, 1e-10) << k;
        EXPECT_NEAR(a.stationarity_residual, b.stationarity_residual, 1e-8 * (1.0 + a.stationarity_residual)) << k;
      }
    }
  }
}

TEST(RpcaStep, EachUpdateIsTheExactMinimizer) {
  const auto inst = small_instance(6, 0.1);
  RpcaConfig cfg = small_config();
  cfg.alpha0 = 2.0;
  const ProblemSpec spec = rpca_problem_spec(inst.m_obs, cfg);
  IterateState s = to_engine_state(rpca_init(inst.m_obs, cfg));
  Rng rng(7);
  // advance a few steps so S is nonzero
  for (int k = 0; k < 3; ++k) s = step(spec, s).state;
  std::vector<Matrix> x = s.x;
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix rest = Matrix::Zero(20, 16);
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) rest += spec.blocks[j].constraint_matrix * x[j];
    const Matrix current = x[i];
    const SubproblemInput in{i, x, current, rest, s.p, s.alpha_current, spec.blocks[i].bregman, spec.mode};
    const Matrix xi = spec.blocks[i].subproblem_solver(in);
    const auto audit = audit_minimizer(spec, in, xi, rng, 20);
    EXPECT_TRUE(audit.passed) << spec.blocks[i].name << " worst " << audit.worst_decrease;
    x[i] = xi;
  }
}

TEST(RpcaStep, MultiplierIdentity) {
  const auto inst = small_instance(8, 0.05);
  RpcaConfig cfg = small_config();
  RpcaState st = rpca_init(inst.m_obs, cfg);
  for (int k = 0; k < 30; ++k) {
    const RpcaState nx = rpca_step(st, cfg, inst.m_obs);
    const Matrix r = nx.t - nx.l - nx.s;
    EXPECT_LE(((nx.p - st.p) - st.alpha_current * r).norm(), 1e-12 * (1.0 + nx.p.norm()));
    st = nx;
  }
}

// The finite noise weight biases L by SVT(M, 1/mu), i.e. relErr ~ sqrt(r) / (mu ||L||_F),
// so the instance must be large enough for that to sit below 1e-6.
TEST(RpcaSolve, RecoversExactlyLowRankInput) {
  InstanceParams p;
  p.m = 200;
  p.rank = 5;
  p.sparsity = 0.0;
  p.seed = 9;
  const auto inst = gen_instance(p);
  RpcaConfig cfg;
  const RpcaTruth truth{inst.l_true, inst.s_true};
  const auto res = rpca_solve(inst.m_obs, cfg, &truth);
  EXPECT_EQ(res.status, RunStatus::converged);
  EXPECT_LE(relerr(res.state.l, inst.l_true), 1e-6);
  EXPECT_TRUE(std::isnan(res.trace.records.back().relerr[1]));
}

TEST(RpcaSolve, TraceRecordsAreConsistent) {
  const auto inst = small_instance(10);
  RpcaConfig cfg = small_config();
  const RpcaTruth truth{inst.l_true, inst.s_true};
  const auto res = rpca_solve(inst.m_obs, cfg, &truth);
  ASSERT_FALSE(res.trace.empty());
  double alpha = cfg.alpha0;
  for (std::size_t k = 0; k < res.trace.size(); ++k) {
    const auto& r = res.trace.records[k];
    EXPECT_EQ(r.iteration, k + 1);
    EXPECT_DOUBLE_EQ(r.alpha, alpha);
    alpha = std::min(alpha * cfg.alpha_growth, cfg.alpha_max);
    EXPECT_GE(r.objective, 0.0);
    EXPECT_EQ(r.relerr.size(), 3u);
  }
  EXPECT_EQ(res.trace.header.at("init_rank"), "1");
}

TEST(RpcaObjective, NonnegativeAndZeroAtTrivialPoint) {
  const auto inst = small_instance(11);
  RpcaConfig cfg;
  const Matrix z = Matrix::Zero(20, 16);
  EXPECT_EQ(rpca_objective(z, z, z, z, cfg), 0.0);
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    const Matrix l = rng.gaussian_matrix(20, 16), s = rng.gaussian_matrix(20, 16), tt = rng.gaussian_matrix(20, 16);
    EXPECT_GE(rpca_objective(l, s, tt, inst.m_obs, cfg), 0.0);
  }
}

TEST(RpcaConstants, MatchEngineMapping) {
  const auto inst = small_instance(12);
  RpcaConfig cfg;
  cfg.gamma1 = 3.0;
  cfg.gamma2 = 0.5;
  cfg.mu = 10.0;
  cfg.alpha0 = 60.0;
  const auto spec = rpca_problem_spec(inst.m_obs, cfg);
  const auto a = descent_constants(spec);
  const auto b = rpca_descent_constants(cfg, 60.0);
  EXPECT_DOUBLE_EQ(a.sigma_c, b.sigma_c);
  EXPECT_EQ(a.ell_h, b.ell_h);
  EXPECT_EQ(a.ell_phi, b.ell_phi);
  EXPECT_EQ(a.moduli, b.moduli);
  EXPECT_TRUE(validate_alpha(spec).passed);
}

TEST(Relerr, Examples) {
  Matrix t(2, 1), e(2, 1);
  t << 3, 4;
  e << 3, 4;
  EXPECT_EQ(relerr(e, t), 0.0);
  e << 0, 0;
  EXPECT_EQ(relerr(e, t), 1.0);
  e << 6, 8;
  EXPECT_EQ(relerr(e, t), 1.0);
  EXPECT_THROW(relerr(e, Matrix::Zero(2, 1)), std::invalid_argument);
  EXPECT_THROW(relerr(e, Matrix::Ones(3, 1)), ShapeError);
}

TEST(LinearSystem, IdentityFromZeroStaysAtZero) {
  const std::vector<Matrix> a = {Matrix::Identity(4, 4)};
  const ProblemSpec spec = linear_system_spec(a, {1.0}, 1.0);
  StoppingRule stop;
  stop.primal_tolerance = 1e-6;
  const auto res = run(spec, initial_state(spec, {Matrix::Zero(4, 1)}), stop);
  EXPECT_EQ(res.status, RunStatus::converged);
  EXPECT_EQ(res.trace.size(), 1u);
  EXPECT_EQ(res.trace.records[0].primal_residual, 0.0);
}

TEST(LinearSystem, TwoBlocksConverge) {
  Rng rng(13);
  const std::vector<Matrix> a = {rng.gaussian_matrix(5, 3), rng.gaussian_matrix(5, 5) + 3.0 * Matrix::Identity(5, 5)};
  ProblemSpec spec = linear_system_spec(a, {1.0, 1.0}, 1.0);
  spec.alpha = 2.0 * descent_constants(spec).alpha_threshold();
  EXPECT_TRUE(validate_alpha(spec).passed);
  StoppingRule stop;
  stop.relchg_threshold = 0;
  stop.max_iterations = 10000;
  stop.primal_tolerance = 1e-6;
  const auto res = run(spec, initial_state(spec, linear_system_random_start(a, 14)), stop);
  ASSERT_EQ(res.status, RunStatus::converged);
  EXPECT_LE(constraint_residual(spec, res.final_state.x).norm(), 1e-6);
}

TEST(LinearSystem, RejectsBadLastBlock) {
  Matrix sing(2, 2);
  sing << 1, 2, 2, 4;
  EXPECT_THROW(linear_system_spec({Matrix::Identity(2, 2), sing}, {1.0, 1.0}, 1.0), ValidationError);
  EXPECT_THROW(linear_system_spec({Matrix::Identity(2, 3)}, {1.0}, 1.0), ValidationError);
  EXPECT_THROW(linear_system_spec({Matrix::Identity(2, 2)}, {0.0}, 1.0), ValidationError);
  EXPECT_THROW(linear_system_spec({Matrix::Identity(3, 3), Matrix::Identity(2, 2)}, {1.0, 1.0}, 1.0), ShapeError);
  EXPECT_THROW(linear_system_spec({Matrix::Identity(2, 2)}, {1.0, 1.0}, 1.0), ShapeError);
}
