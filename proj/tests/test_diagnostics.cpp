#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "badmm/diagnostics.hpp"
#include "badmm/rpca.hpp"
#include "toy_problems.hpp"

using namespace badmm;

namespace {

StepRecord record(std::size_t iter, double alpha, double lhat_prev, double lhat, std::vector<double> steps,
                  double dp = 0.0, double prev_last = 0.0) {
  StepRecord r;
  r.iteration = iter;
  r.alpha = alpha;
  r.lhat_prev = lhat_prev;
  r.lhat = lhat;
  r.block_steps = std::move(steps);
  r.multiplier_step = dp;
  r.prev_last_step = prev_last;
  r.relchg = 0.0;
  r.primal_residual = 0.0;
  r.stationarity_residual = 0.0;
  return r;
}

DescentConstants unit_constants() {
  DescentConstants c;
  c.sigma_c = 1.0;
  c.ell_h = 1.0;
  c.ell_phi = 0.0;
  c.moduli = {1.0};
  return c;
}

}  // namespace

TEST(CheckDescent, ConstantTraceHasZeroMargins) {
  Trace t;
  t.block_names = {"a"};
  for (std::size_t k = 1; k <= 10; ++k) t.records.push_back(record(k, 1.0, 5.0, 5.0, {0.0}));
  const auto c = check_descent(t, 0.5);
  EXPECT_TRUE(c.passed());
  EXPECT_EQ(c.margins.size(), 9u);
  for (double m : c.margins) EXPECT_EQ(m, 0.0);
  EXPECT_EQ(c.iterations.front(), 2u);
}

TEST(CheckDescent, FlagsFabricatedViolation) {
  Trace t;
  t.records.push_back(record(1, 1.0, 10.0, 9.0, {1.0}));
  t.records.push_back(record(2, 1.0, 9.0, 8.0, {1.0}));   // margin 1 - 0.5 = 0.5
  t.records.push_back(record(3, 1.0, 8.0, 7.8, {1.0}));   // margin 0.2 - 0.5 = -0.3
  t.records.push_back(record(4, 1.0, 7.8, 7.3, {1.0}));   // exactly 0
  const auto c = check_descent(t, 0.5);
  EXPECT_EQ(c.violations, 1u);
  ASSERT_EQ(c.margins.size(), 3u);
  EXPECT_NEAR(c.margins[0], 0.5, 1e-15);
  EXPECT_NEAR(c.margins[1], -0.3, 1e-12);
  EXPECT_NEAR(c.worst_margin, -0.3, 1e-12);
}

TEST(CheckDescent, SkipsSteps_AfterAlphaChangeOrGap) {
  Trace t;
  t.records.push_back(record(1, 1.0, 0.0, 100.0, {1.0}));
  t.records.push_back(record(2, 2.0, 0.0, 100.0, {1.0}));  // alpha changed
  t.records.push_back(record(4, 2.0, 0.0, 100.0, {1.0}));  // gap
  EXPECT_TRUE(check_descent(t, 1.0).margins.empty());
  t.records.push_back(record(5, 2.0, 0.0, 100.0, {1.0}));
  EXPECT_EQ(check_descent(t, 1.0).violations, 1u);
}

TEST(CheckDescent, ToleratesRoundingRelativeToScale) {
  Trace t;
  t.records.push_back(record(1, 1.0, 1e6, 1e6, {0.0}));
  t.records.push_back(record(2, 1.0, 1e6, 1e6 + 1e-3, {0.0}));
  EXPECT_TRUE(check_descent(t, 1.0).passed());
  t.records.back().lhat = 1e6 + 1.0;
  EXPECT_FALSE(check_descent(t, 1.0).passed());
}

TEST(CheckMultiplierBound, Arithmetic) {
  // rhs = 2 (1 + 0)^2 / 1 * dz^2 = 2 dz^2
  Trace t;
  t.records.push_back(record(1, 1.0, 0, 0, {0.0, 1.0}, 5.0));
  t.records.push_back(record(2, 1.0, 0, 0, {0.0, 1.0}, std::sqrt(2.0)));
  t.records.push_back(record(3, 1.0, 0, 0, {0.0, 1.0}, 1.5));
  const auto c = check_multiplier_bound(t, unit_constants());
  ASSERT_EQ(c.margins.size(), 2u);
  EXPECT_EQ(c.violations, 1u);
  EXPECT_NEAR(c.margins[0], 0.0, 1e-14);
  EXPECT_NEAR(c.margins[1], 2.0 - 2.25, 1e-14);
}

TEST(CheckMultiplierBound, UsesPreviousLastBlockStep) {
  DescentConstants c = unit_constants();
  c.ell_phi = 1.0;  // rhs = 8 dz^2 + 2 dprev^2
  Trace t;
  t.records.push_back(record(1, 1.0, 0, 0, {0.0}, 0.0));
  t.records.push_back(record(2, 1.0, 0, 0, {0.0}, 1.4, 1.0));
  EXPECT_EQ(check_multiplier_bound(t, c).violations, 0u);
  t.records.back().multiplier_step = 1.5;
  EXPECT_EQ(check_multiplier_bound(t, c).violations, 1u);
}

TEST(Summability, GeometricVersusConstantSteps) {
  Trace geo, flat;
  for (std::size_t k = 1; k <= 40; ++k) {
    geo.records.push_back(record(k, 1, 0, 0, {std::pow(0.8, double(k))}));
    flat.records.push_back(record(k, 1, 0, 0, {1.0}));
  }
  const auto g = summability_report(geo);
  const auto f = summability_report(flat);
  ASSERT_TRUE(g.enough_data);
  EXPECT_TRUE(g.consistent);
  EXPECT_NEAR(g.tail_ratio, std::pow(0.8, 10.0), 1e-12);
  EXPECT_FALSE(f.consistent);
  EXPECT_DOUBLE_EQ(f.tail_ratio, 1.0);
  EXPECT_DOUBLE_EQ(f.running_sq.back(), 40.0);
  Trace short_trace;
  short_trace.records.assign(geo.records.begin(), geo.records.begin() + 5);
  EXPECT_FALSE(summability_report(short_trace).enough_data);
}

TEST(Diagnose, RealRunPasses) {
  ProblemSpec spec = toy::random_quadratic(3, 3, 4, 1.0);
  spec.alpha = 1.5 * descent_constants(spec).alpha_threshold();
  StoppingRule stop;
  stop.relchg_threshold = 0;
  stop.max_iterations = 300;
  const auto res = run(spec, initial_state(spec, toy::random_start(4, spec)), stop);
  const auto rep = diagnose(res.trace, sigma_constants(spec).sigma1, descent_constants(spec));
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.records, 300u);
  EXPECT_TRUE(rep.summability.consistent);
  EXPECT_LT(rep.final_stationarity, 1e-2 * res.trace.records.front().stationarity_residual);
}

TEST(Diagnose, RpcaFixedPenaltyRunPasses) {
  Rng rng(5);
  const Matrix m = rng.gaussian_matrix(12, 10);
  RpcaConfig cfg;
  cfg.mu = 10.0;
  cfg.gamma1 = 60.0;
  cfg.gamma2 = 1.0;
  cfg.alpha0 = 60.0;
  cfg.dynamic_alpha = false;
  cfg.relchg_threshold = 0;
  cfg.max_iterations = 200;
  const auto res = rpca_solve(m, cfg);
  const auto c = rpca_descent_constants(cfg, 60.0);
  ASSERT_GT(c.sigma1(60.0), 0.0);
  const auto rep = diagnose(res.trace, c.sigma1(60.0), c);
  EXPECT_TRUE(rep.passed()) << rep.checks[0].worst_margin << " " << rep.checks[1].worst_margin;
}

TEST(Diagnose, EmptyTraceReportsNoIterations) {
  const auto rep = diagnose(Trace{}, 1.0, unit_constants());
  EXPECT_TRUE(rep.passed());
  std::ostringstream os;
  write_report_text(os, rep);
  EXPECT_EQ(os.str(), "no iterations\n");
}

TEST(Diagnose, ReportSerialization) {
  Trace t;
  t.records.push_back(record(1, 1.0, 10.0, 9.0, {1.0}));
  t.records.push_back(record(2, 1.0, 9.0, 9.5, {1.0}));
  const auto rep = diagnose(t, 0.5, unit_constants());
  EXPECT_FALSE(rep.passed());
  std::ostringstream text, csv;
  write_report_text(text, rep);
  write_report_csv(csv, rep);
  EXPECT_NE(text.str().find("merit_descent: VIOLATED"), std::string::npos);
  EXPECT_NE(text.str().find("verdict: FAIL"), std::string::npos);
  EXPECT_NE(csv.str().find("check,iter,margin\nmerit_descent,2,-1\n"), std::string::npos);
}
