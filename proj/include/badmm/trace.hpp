#ifndef BADMM_TRACE_HPP_
#define BADMM_TRACE_HPP_

#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "badmm/format.hpp"
#include "badmm/matrix_io.hpp"

namespace badmm {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One completed engine step k -> k+1. Merit values are evaluated with the
/// penalty `alpha` that produced the step, so `lhat_prev - lhat` is the
/// per-step merit decrease even when the penalty is scheduled.
struct StepRecord {
  std::size_t iteration = 0;  ///< k+1
  double alpha = 0.0;
  double objective = kNaN;  ///< sum_i f_i(x_i^{k+1})
  double lagrangian = kNaN;
  double lhat = kNaN;       ///< merit at the new state; NaN when constants are unavailable
  double lhat_prev = kNaN;  ///< merit at the old state, same alpha
  double primal_residual = kNaN;   ///< ||sum_i A_i x_i^{k+1}||_F
  double multiplier_step = kNaN;   ///< ||p^{k+1} - p^k||_F
  std::vector<double> block_steps;  ///< ||x_i^{k+1} - x_i^k||_F
  double prev_last_step = kNaN;    ///< ||x_N^k - x_N^{k-1}||_F
  double relchg = kNaN;
  std::vector<double> relerr;  ///< per block; NaN without ground truth
  double stationarity_residual = kNaN;  ///< largest per-block dual residual norm
};

struct Trace {
  std::vector<std::string> block_names;
  std::map<std::string, std::string> header;  ///< run metadata, echoed in every serialization
  std::vector<StepRecord> records;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
};

// CSV: optional "# key=value" metadata lines, then the column header
//   iter,alpha,objective,lagrangian,lhat,relChg,relErr_<block>...,primal_res,stationarity_res
// and one row per record. Floats use shortest round-trip formatting.

inline std::vector<std::string> trace_csv_columns(const Trace& t) {
  std::vector<std::string> cols = {"iter", "alpha", "objective", "lagrangian", "lhat", "relChg"};
  for (const auto& b : t.block_names) cols.push_back("relErr_" + b);
  cols.push_back("primal_res");
  cols.push_back("stationarity_res");
  return cols;
}

inline void write_trace_csv(std::ostream& os, const Trace& t) {
  for (const auto& [k, v] : t.header) os << "# " << k << '=' << v << '\n';
  const auto cols = trace_csv_columns(t);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : t.records) {
    os << r.iteration << ',' << format_double(r.alpha) << ',' << format_double(r.objective) << ','
       << format_double(r.lagrangian) << ',' << format_double(r.lhat) << ','
       << format_double(r.relchg);
    for (std::size_t b = 0; b < t.block_names.size(); ++b) {
      os << ',' << format_double(b < r.relerr.size() ? r.relerr[b] : kNaN);
    }
    os << ',' << format_double(r.primal_residual) << ',' << format_double(r.stationarity_residual)
       << '\n';
  }
}

// Line-delimited JSON: a header object, then one object per record. NaN is
// written as null.

namespace detail {

inline nlohmann::json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline double from_num(const nlohmann::json& j) {
  if (j.is_null()) return kNaN;
  return j.get<double>();
}

inline nlohmann::json nums(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::vector<double> from_nums(const nlohmann::json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(from_num(x));
  return out;
}

}  // namespace detail

inline nlohmann::json record_to_json(const StepRecord& r) {
  return {{"type", "step"},
          {"iter", r.iteration},
          {"alpha", detail::num(r.alpha)},
          {"objective", detail::num(r.objective)},
          {"lagrangian", detail::num(r.lagrangian)},
          {"lhat", detail::num(r.lhat)},
          {"lhat_prev", detail::num(r.lhat_prev)},
          {"primal_res", detail::num(r.primal_residual)},
          {"multiplier_step", detail::num(r.multiplier_step)},
          {"block_steps", detail::nums(r.block_steps)},
          {"prev_last_step", detail::num(r.prev_last_step)},
          {"relChg", detail::num(r.relchg)},
          {"relErr", detail::nums(r.relerr)},
          {"stationarity_res", detail::num(r.stationarity_residual)}};
}

inline StepRecord record_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.iteration = j.at("iter").get<std::size_t>();
  r.alpha = detail::from_num(j.at("alpha"));
  r.objective = detail::from_num(j.value("objective", nlohmann::json()));
  r.lagrangian = detail::from_num(j.value("lagrangian", nlohmann::json()));
  r.lhat = detail::from_num(j.value("lhat", nlohmann::json()));
  r.lhat_prev = detail::from_num(j.value("lhat_prev", nlohmann::json()));
  r.primal_residual = detail::from_num(j.value("primal_res", nlohmann::json()));
  r.multiplier_step = detail::from_num(j.value("multiplier_step", nlohmann::json()));
  r.block_steps = detail::from_nums(j.value("block_steps", nlohmann::json::array()));
  r.prev_last_step = detail::from_num(j.value("prev_last_step", nlohmann::json()));
  r.relchg = detail::from_num(j.value("relChg", nlohmann::json()));
  r.relerr = detail::from_nums(j.value("relErr", nlohmann::json::array()));
  r.stationarity_residual = detail::from_num(j.value("stationarity_res", nlohmann::json()));
  return r;
}

inline void write_trace_jsonl(std::ostream& os, const Trace& t) {
  nlohmann::json head = {{"type", "header"}, {"blocks", t.block_names}, {"meta", t.header}};
  os << head.dump() << '\n';
  for (const auto& r : t.records) os << record_to_json(r).dump() << '\n';
}

inline Trace read_trace_jsonl(std::istream& is, const std::string& source = "<stream>") {
  Trace t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.value("type", "step");
      if (type == "header") {
        t.block_names = j.value("blocks", std::vector<std::string>{});
        t.header = j.value("meta", std::map<std::string, std::string>{});
      } else {
        t.records.push_back(record_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

}  // namespace badmm

#endif  // BADMM_TRACE_HPP_
