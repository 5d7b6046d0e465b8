#ifndef BADMM_DIAGNOSTICS_HPP_
#define BADMM_DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "badmm/engine.hpp"
#include "badmm/trace.hpp"

namespace badmm {

// Checks along a trace. Both inequalities below rely on the last block's
// optimality at the *previous* step (it ties p^k to grad f_N(x_N^k)), so a
// record is only eligible when the record before it exists and ran with the
// same alpha: the first step out of an arbitrary start is skipped, and with
// a schedule only the stretch where alpha has saturated is checked.

struct CheckResult {
  std::string name;
  std::vector<std::size_t> iterations;  ///< eligible records
  std::vector<double> margins;          ///< >= 0 means the inequality holds
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  bool assertable = true;

  bool passed() const { return violations == 0; }
};

namespace detail {

inline bool eligible(const Trace& t, std::size_t k) {
  if (k == 0) return false;
  const StepRecord& r = t.records[k];
  return r.iteration == t.records[k - 1].iteration + 1 && r.alpha == t.records[k - 1].alpha;
}

inline void add_margin(CheckResult& c, std::size_t iter, double margin, bool violated) {
  c.iterations.push_back(iter);
  c.margins.push_back(margin);
  c.worst_margin = std::min(c.worst_margin, margin);
  if (violated) ++c.violations;
}

}  // namespace detail

/// Merit descent: margin = lhat_prev - lhat - sigma1 sum_i ||dx_i||^2,
/// violated when below -1e-8 (1 + |lhat_prev|).
inline CheckResult check_descent(const Trace& t, double sigma1, double slack = 1e-8) {
  CheckResult c;
  c.name = "merit_descent";
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    if (!detail::eligible(t, k)) continue;
    const StepRecord& r = t.records[k];
    if (!std::isfinite(r.lhat) || !std::isfinite(r.lhat_prev)) continue;
    double steps = 0.0;
    for (double s : r.block_steps) steps += s * s;
    const double margin = r.lhat_prev - r.lhat - sigma1 * steps;
    detail::add_margin(c, r.iteration, margin, margin < -slack * (1.0 + std::abs(r.lhat_prev)));
  }
  return c;
}

/// ||dp||^2 <= (2 (ell_h+ell_phi)^2 / sigma_C) ||dx_N||^2 + (2 ell_phi^2 / sigma_C) ||x_N^k - x_N^{k-1}||^2
/// with relative slack 1e-10.
inline CheckResult check_multiplier_bound(const Trace& t, const DescentConstants& c0, double slack = 1e-10) {
  CheckResult c;
  c.name = "multiplier_bound";
  const double s = c0.ell_h + c0.ell_phi;
  const double a = 2.0 * s * s / c0.sigma_c;
  const double b = 2.0 * c0.ell_phi * c0.ell_phi / c0.sigma_c;
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    if (!detail::eligible(t, k)) continue;
    const StepRecord& r = t.records[k];
    if (r.block_steps.empty()) continue;
    const double dz = r.block_steps.back();
    const double rhs = a * dz * dz + b * r.prev_last_step * r.prev_last_step;
    const double lhs = r.multiplier_step * r.multiplier_step;
    const double margin = rhs - lhs;
    detail::add_margin(c, r.iteration, margin, margin < -slack * std::max(1.0, rhs));
  }
  return c;
}

/// Finite-trace proxy for summability of the steps. Never a pass/fail test.
struct SummabilityReport {
  std::vector<double> running_sq;  ///< partial sums of ||w^{k+1} - w^k||^2
  std::vector<double> running_l1;  ///< partial sums of sum of block step norms
  double tail_ratio = std::numeric_limits<double>::quiet_NaN();
  bool enough_data = false;
  bool consistent = false;
};

/// w = (x_1, ..., x_N, p). tail_ratio is the increment of the l1 partial sum
/// over the last quarter divided by that over the quarter before it; below
/// 0.5 is flagged consistent with a finite total. Needs >= 8 records.
inline SummabilityReport summability_report(const Trace& t) {
  SummabilityReport r;
  double sq = 0.0;
  double l1 = 0.0;
  for (const auto& rec : t.records) {
    double step_sq = rec.multiplier_step * rec.multiplier_step;
    double step_l1 = rec.multiplier_step;
    for (double b : rec.block_steps) {
      step_sq += b * b;
      step_l1 += b;
    }
    sq += step_sq;
    l1 += step_l1;
    r.running_sq.push_back(sq);
    r.running_l1.push_back(l1);
  }
  const std::size_t n = r.running_l1.size();
  if (n < 8) return r;
  r.enough_data = true;
  const std::size_t q = n / 4;
  auto at = [&](std::size_t i) { return i == 0 ? 0.0 : r.running_l1[i - 1]; };  // sum of the first i steps
  const double last = at(n) - at(n - q);
  const double before = at(n - q) - at(n - 2 * q);
  r.tail_ratio = before > 0.0 ? last / before : (last > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.consistent = r.tail_ratio < 0.5;
  return r;
}

struct DiagnosticsReport {
  std::size_t records = 0;
  std::vector<CheckResult> checks;
  SummabilityReport summability;
  double final_stationarity = std::numeric_limits<double>::quiet_NaN();
  double final_primal = std::numeric_limits<double>::quiet_NaN();

  bool passed() const {
    for (const auto& c : checks)
      if (c.assertable && !c.passed()) return false;
    return true;
  }
};

inline DiagnosticsReport diagnose(const Trace& t, double sigma1, const DescentConstants& c) {
  DiagnosticsReport r;
  r.records = t.records.size();
  r.checks.push_back(check_descent(t, sigma1));
  r.checks.push_back(check_multiplier_bound(t, c));
  r.summability = summability_report(t);
  if (!t.records.empty()) {
    r.final_stationarity = t.records.back().stationarity_residual;
    r.final_primal = t.records.back().primal_residual;
  }
  return r;
}

inline void write_report_text(std::ostream& os, const DiagnosticsReport& r) {
  if (r.records == 0) {
    os << "no iterations\n";
    return;
  }
  os << "records: " << r.records << '\n';
  for (const auto& c : r.checks) {
    os << c.name << ": " << (c.passed() ? "ok" : "VIOLATED") << " (" << c.violations << " violations over "
       << c.margins.size() << " eligible steps, worst margin "
       << (c.margins.empty() ? std::string("n/a") : format_double(c.worst_margin)) << ")\n";
  }
  const auto& s = r.summability;
  os << "summability_proxy: ";
  if (!s.enough_data) {
    os << "not enough records\n";
  } else {
    os << (s.consistent ? "consistent with summability" : "not consistent with summability")
       << " (tail ratio " << format_double(s.tail_ratio) << ", sum ||dw||^2 = " << format_double(s.running_sq.back())
       << ")\n";
  }
  os << "final stationarity residual: " << format_double(r.final_stationarity) << '\n';
  os << "final primal residual: " << format_double(r.final_primal) << '\n';
  os << "verdict: " << (r.passed() ? "pass" : "FAIL") << '\n';
}

/// One row per (check, eligible iteration): check,iter,margin
inline void write_report_csv(std::ostream& os, const DiagnosticsReport& r) {
  os << "check,iter,margin\n";
  for (const auto& c : r.checks)
    for (std::size_t i = 0; i < c.margins.size(); ++i)
      os << c.name << ',' << c.iterations[i] << ',' << format_double(c.margins[i]) << '\n';
}

}  // namespace badmm

#endif  // BADMM_DIAGNOSTICS_HPP_
