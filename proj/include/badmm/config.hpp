#ifndef BADMM_CONFIG_HPP_
#define BADMM_CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "badmm/engine.hpp"
#include "badmm/format.hpp"
#include "badmm/rpca.hpp"

namespace badmm {

// Config files: one `key = value` per line, '#' starts a comment, blank
// lines ignored. Errors name the file and line.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::vector<KeyValue> parse_key_values(std::istream& is, const std::string& source = "<config>") {
  std::vector<KeyValue> out;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen[key] = line_no;
    out.push_back({key, value, line_no});
  }
  return out;
}

// Typed fields shared by the config file and the command line.

struct ConfigField {
  std::string name;
  std::function<void(std::string_view)> set;  // throws std::invalid_argument on bad text
  std::function<std::string()> get;
};

namespace detail {

inline double to_double(std::string_view v) {
  double d = 0;
  if (!parse_double(v, d) || !std::isfinite(d)) throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
  return d;
}

inline std::size_t to_count(std::string_view v) {
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return n;
}

inline bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected true/false, got '" + std::string(v) + "'");
}

inline ConfigField real_field(std::string name, double& ref) {
  return {std::move(name), [&ref](std::string_view v) { ref = to_double(v); }, [&ref] { return format_double(ref); }};
}

// "auto" (or empty) leaves the value unset.
inline ConfigField optional_field(std::string name, std::optional<double>& ref) {
  return {std::move(name),
          [&ref](std::string_view v) {
            if (v.empty() || v == "auto") {
              ref.reset();
            } else {
              ref = to_double(v);
            }
          },
          [&ref] { return ref ? format_double(*ref) : std::string("auto"); }};
}

inline ConfigField count_field(std::string name, std::size_t& ref) {
  return {std::move(name), [&ref](std::string_view v) { ref = to_count(v); }, [&ref] { return std::to_string(ref); }};
}

inline ConfigField bool_field(std::string name, bool& ref) {
  return {std::move(name), [&ref](std::string_view v) { ref = to_bool(v); }, [&ref] { return std::string(ref ? "true" : "false"); }};
}

}  // namespace detail

/// Field table over an RpcaConfig. The references stay valid as long as `cfg` does.
inline std::vector<ConfigField> rpca_config_fields(RpcaConfig& cfg) {
  using namespace detail;
  return {optional_field("lambda", cfg.lambda),
          real_field("lambda_scale", cfg.lambda_scale),
          real_field("mu", cfg.mu),
          optional_field("gamma1", cfg.gamma1),
          optional_field("gamma2", cfg.gamma2),
          real_field("alpha0", cfg.alpha0),
          bool_field("dynamic_alpha", cfg.dynamic_alpha),
          real_field("alpha_growth", cfg.alpha_growth),
          real_field("alpha_max", cfg.alpha_max),
          real_field("init_rank_fraction", cfg.init_rank_fraction),
          real_field("relchg_threshold", cfg.relchg_threshold),
          count_field("max_iter", cfg.max_iterations)};
}

/// Applies `kvs` to `fields`. Keys in `skip` are left alone (already set
/// elsewhere, e.g. on the command line). Unknown keys are errors unless
/// `allow_unknown`.
inline void apply_key_values(const std::vector<KeyValue>& kvs, const std::vector<ConfigField>& fields,
                             const std::string& source, const std::vector<std::string>& skip = {},
                             bool allow_unknown = false) {
  for (const auto& kv : kvs) {
    if (std::find(skip.begin(), skip.end(), kv.key) != skip.end()) continue;
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) { return f.name == kv.key; });
    const auto where = source + ":" + std::to_string(kv.line) + ": ";
    if (it == fields.end()) {
      if (allow_unknown) continue;
      throw ConfigError(where + "unknown key '" + kv.key + "'");
    }
    try {
      it->set(kv.value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + kv.key + ": " + e.what());
    }
  }
}

inline void write_config(std::ostream& os, const std::vector<ConfigField>& fields) {
  for (const auto& f : fields) os << f.name << " = " << f.get() << '\n';
}

inline void write_rpca_config(std::ostream& os, RpcaConfig cfg) { write_config(os, rpca_config_fields(cfg)); }

inline RpcaConfig read_rpca_config(std::istream& is, const std::string& source = "<config>") {
  RpcaConfig cfg;
  apply_key_values(parse_key_values(is, source), rpca_config_fields(cfg), source);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

// Constants consumed by `diagnose`: sigma1 for the merit check, and the
// last block's sigma_c, ell_h, ell_phi for the multiplier bound.

struct TraceConstants {
  double sigma1 = 0.0;
  DescentConstants descent;
};

inline void write_trace_constants(std::ostream& os, const TraceConstants& c) {
  os << "sigma1 = " << format_double(c.sigma1) << '\n'
     << "sigma_c = " << format_double(c.descent.sigma_c) << '\n'
     << "ell_h = " << format_double(c.descent.ell_h) << '\n'
     << "ell_phi = " << format_double(c.descent.ell_phi) << '\n';
}

inline TraceConstants read_trace_constants(std::istream& is, const std::string& source = "<constants>") {
  TraceConstants c;
  std::vector<ConfigField> fields = {detail::real_field("sigma1", c.sigma1),
                                     detail::real_field("sigma_c", c.descent.sigma_c),
                                     detail::real_field("ell_h", c.descent.ell_h),
                                     detail::real_field("ell_phi", c.descent.ell_phi)};
  const auto kvs = parse_key_values(is, source);
  for (const char* key : {"sigma1", "sigma_c", "ell_h", "ell_phi"}) {
    if (std::none_of(kvs.begin(), kvs.end(), [&](const KeyValue& kv) { return kv.key == key; })) {
      throw ConfigError(source + ": missing key '" + key + "'");
    }
  }
  apply_key_values(kvs, fields, source);
  if (!(c.descent.sigma_c > 0.0)) throw ConfigError(source + ": sigma_c must be positive");
  c.descent.moduli = {0.0};
  return c;
}

}  // namespace badmm

#endif  // BADMM_CONFIG_HPP_
