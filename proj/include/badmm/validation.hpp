#ifndef BADMM_VALIDATION_HPP_
#define BADMM_VALIDATION_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "badmm/engine.hpp"

namespace badmm {

enum class ConditionStatus { satisfied, violated, asserted };

inline const char* to_string(ConditionStatus s) {
  switch (s) {
    case ConditionStatus::satisfied:
      return "satisfied";
    case ConditionStatus::violated:
      return "violated";
    case ConditionStatus::asserted:
      return "asserted by model, not verified";
  }
  return "?";
}

struct Condition {
  std::string name;
  ConditionStatus status = ConditionStatus::asserted;
  std::string detail;
};

struct ValidationReport {
  std::string check;
  bool passed = false;
  double alpha = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::vector<Condition> conditions;

  const Condition* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline void write_report(std::ostream& os, const ValidationReport& r) {
  os << r.check << ": " << (r.passed ? "pass" : "FAIL") << " (alpha = " << format_double(r.alpha)
     << ", threshold = " << format_double(r.threshold) << ")\n";
  for (const auto& c : r.conditions) {
    os << "  " << c.name << ": " << to_string(c.status);
    if (!c.detail.empty()) os << " -- " << c.detail;
    os << '\n';
  }
}

namespace detail {

inline Condition mechanical(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok ? ConditionStatus::satisfied : ConditionStatus::violated, std::move(detail)};
}

inline Condition asserted(std::string name, std::string detail = {}) {
  return {std::move(name), ConditionStatus::asserted, std::move(detail)};
}

inline std::vector<Condition> moduli_conditions(const ProblemSpec& spec, const DescentConstants& c) {
  std::vector<Condition> out;
  for (std::size_t i = 0; i < c.moduli.size(); ++i) {
    out.push_back(mechanical("strong_convexity:" + spec.blocks[i].name, c.moduli[i] > 0.0,
                             "mu = " + format_double(c.moduli[i])));
  }
  return out;
}

}  // namespace detail

/// alpha > 4[(ell_h+ell_phi)^2 + ell_phi^2] / (mu_N sigma_C), strictly.
/// Never throws; missing constants appear as violated conditions.
inline ValidationReport validate_alpha(const ProblemSpec& spec, double alpha) {
  ValidationReport r;
  r.check = "penalty_threshold";
  r.alpha = alpha;
  DescentConstants c;
  try {
    c = descent_constants(spec);
  } catch (const std::exception& e) {
    r.conditions.push_back(detail::mechanical("descent_constants_available", false, e.what()));
    return r;
  }
  r.threshold = c.alpha_threshold();
  r.passed = alpha > r.threshold;
  r.conditions.push_back(detail::mechanical(
      "alpha_above_threshold", r.passed,
      "sigma_C = " + format_double(c.sigma_c) + ", ell_h = " + format_double(c.ell_h) +
          ", ell_phi = " + format_double(c.ell_phi) + ", mu_N = " + format_double(c.moduli.back()) +
          ", sigma1 = " + format_double(c.sigma1(alpha))));
  for (auto& m : detail::moduli_conditions(spec, c)) r.conditions.push_back(std::move(m));
  return r;
}

inline ValidationReport validate_alpha(const ProblemSpec& spec) { return validate_alpha(spec, spec.alpha); }

enum class BoundednessBranch { automatic, coercive, square };

/// Boundedness of the iterates. Mechanical conditions:
///   - last constraint matrix full row rank;
///   - all block moduli positive;
///   - alpha > alpha0, where
///       coercive branch: alpha0 = max(2/(beta0 sigma_C), 4[(ell_h+ell_phi)^2+ell_phi^2]/(mu_N sigma_C))
///       square branch:   alpha0 = ||C^{-1}||^2 max(ell_h, 4[(ell_h+ell_phi)^2+ell_phi^2]/mu_N)
///     (automatic picks square when A_N is square).
/// Lower-boundedness, coercivity and subanalyticity are listed as asserted.
inline ValidationReport validate_boundedness(const ProblemSpec& spec, double beta0, double alpha,
                                             BoundednessBranch branch = BoundednessBranch::automatic) {
  ValidationReport r;
  r.check = "iterate_boundedness";
  r.alpha = alpha;
  if (!(beta0 > 0.0)) {
    r.conditions.push_back(detail::mechanical("beta0_positive", false, "beta0 = " + format_double(beta0)));
    return r;
  }
  DescentConstants c;
  try {
    c = descent_constants(spec);
  } catch (const std::exception& e) {
    r.conditions.push_back(detail::mechanical("descent_constants_available", false, e.what()));
    return r;
  }
  const Matrix& an = spec.blocks.back().constraint_matrix;
  const bool square = an.rows() == an.cols();
  if (branch == BoundednessBranch::automatic) {
    branch = square ? BoundednessBranch::square : BoundednessBranch::coercive;
  }
  const double s = c.ell_h + c.ell_phi;
  const double q = 4.0 * (s * s + c.ell_phi * c.ell_phi);
  const double mu_n = c.moduli.back();
  const double ratio = q == 0.0 ? 0.0 : (mu_n > 0.0 ? q / mu_n : std::numeric_limits<double>::infinity());

  bool ok = true;
  r.conditions.push_back(detail::mechanical("last_block_full_row_rank", c.sigma_c > 0.0,
                                            "sigma_C = " + format_double(c.sigma_c)));
  for (auto& m : detail::moduli_conditions(spec, c)) {
    ok = ok && m.status == ConditionStatus::satisfied;
    r.conditions.push_back(std::move(m));
  }
  r.conditions.push_back(detail::asserted("objectives_bounded_below"));
  if (branch == BoundednessBranch::square) {
    if (!square) {
      r.conditions.push_back(detail::mechanical("last_block_square", false, shape_string(an)));
      return r;
    }
    // ||C^{-1}||^2 = 1 / sigma_min(C)^2 = 1 / sigma_C for square C.
    r.threshold = std::max(c.ell_h, ratio) / c.sigma_c;
    r.conditions.push_back(detail::mechanical("last_block_square", true));
    r.conditions.push_back(detail::asserted("sum_of_nonsmooth_objectives_coercive"));
  } else {
    r.threshold = std::max(2.0 / (beta0 * c.sigma_c), ratio / c.sigma_c);
    r.conditions.push_back(detail::asserted("smooth_part_minus_beta0_gradient_bounded_below",
                                            "inf f_N - beta0 ||grad f_N||^2 > -inf, beta0 = " + format_double(beta0)));
    r.conditions.push_back(detail::asserted("objective_sum_coercive"));
  }
  r.conditions.push_back(detail::asserted("objectives_subanalytic"));
  const bool above = alpha > r.threshold;
  r.conditions.push_back(detail::mechanical("alpha_above_boundedness_threshold", above,
                                            "alpha0 = " + format_double(r.threshold)));
  r.passed = ok && above && c.sigma_c > 0.0;
  return r;
}

inline ValidationReport validate_boundedness(const ProblemSpec& spec, double beta0,
                                             BoundednessBranch branch = BoundednessBranch::automatic) {
  return validate_boundedness(spec, beta0, spec.alpha, branch);
}

}  // namespace badmm

#endif  // BADMM_VALIDATION_HPP_
