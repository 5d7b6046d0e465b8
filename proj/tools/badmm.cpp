// badmm: command-line front end.
//
//   simulate      synthetic low-rank + sparse recovery
//   bgsub         background subtraction on a directory of PGM frames
//   diagnose      convergence checks on a JSONL trace
//   solve-linear  block-split homogeneous linear system
//   sweep-mu      recovery error over a grid of noise weights
//   make-frames   write a synthetic moving-square sequence
//
// Exit codes: 0 success, 1 diagnostic violation, 2 usage/config/IO error,
// 3 numeric failure.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "badmm/config.hpp"
#include "badmm/datagen.hpp"
#include "badmm/diagnostics.hpp"
#include "badmm/linear_system.hpp"
#include "badmm/matrix_io.hpp"
#include "badmm/rpca.hpp"
#include "badmm/trace.hpp"
#include "badmm/validation.hpp"
#include "badmm/video.hpp"

namespace fs = std::filesystem;
using namespace badmm;

namespace {

enum ExitCode { kOk = 0, kViolation = 1, kUsage = 2, kNumeric = 3 };

// ---------------------------------------------------------------------------
// fields beyond the ones config.hpp provides

ConfigField string_field(std::string name, std::string& ref) {
  return {std::move(name), [&ref](std::string_view v) { ref = std::string(v); }, [&ref] { return ref; }};
}

ConfigField index_field(std::string name, Index& ref) {
  return {std::move(name), [&ref](std::string_view v) { ref = static_cast<Index>(detail::to_count(v)); },
          [&ref] { return std::to_string(ref); }};
}

ConfigField u64_field(std::string name, std::uint64_t& ref) {
  return {std::move(name),
          [&ref](std::string_view v) {
            std::uint64_t n = 0;
            const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
            if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
              throw std::invalid_argument("expected an unsigned integer, got '" + std::string(v) + "'");
            }
            ref = n;
          },
          [&ref] { return std::to_string(ref); }};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = detail::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<double> parse_reals(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      out.push_back(detail::to_double(tok));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(what) + ": " + e.what());
    }
  }
  return out;
}

std::string flag_of(const std::string& key) {
  std::string f = "--" + key;
  for (auto& c : f)
    if (c == '_') c = '-';
  return f;
}

// A subcommand whose parameters are all ConfigFields: each is a flag
// (`foo_bar` -> `--foo-bar`) and a config-file key, and flags win.
struct Command {
  CLI::App* app = nullptr;
  std::vector<ConfigField> fields;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void bind(CLI::App* sub, std::vector<ConfigField> f) {
    app = sub;
    fields = std::move(f);
    for (const auto& field : fields) {
      const std::string flag = flag_of(field.name);
      auto set = field.set;
      options[field.name] = sub->add_option_function<std::string>(
          flag,
          [set, flag](const std::string& v) {
            try {
              set(v);
            } catch (const std::invalid_argument& e) {
              throw CLI::ValidationError(flag, e.what());
            }
          },
          "default: " + field.get());
    }
    sub->add_option("--config", config_path, "key = value file; flags override it");
  }

  void apply_config() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open " + config_path);
    std::vector<std::string> skip;
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) skip.push_back(name);
    apply_key_values(parse_key_values(in, config_path), fields, config_path, skip);
  }

  void write_resolved(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_config(out, fields);
  }
};

void append(std::vector<ConfigField>& to, std::vector<ConfigField> more) {
  for (auto& f : more) to.push_back(std::move(f));
}

std::vector<ConfigField> instance_fields(InstanceParams& p) {
  return {index_field("m", p.m),
          index_field("n", p.n),
          index_field("rank", p.rank),
          detail::real_field("sparsity", p.sparsity),
          detail::real_field("magnitude", p.magnitude),
          detail::real_field("sigma", p.sigma),
          u64_field("seed", p.seed)};
}

void save_text(const fs::path& path, const std::function<void(std::ostream&)>& write) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
  if (!out) throw IoError("write failed: " + path.string());
}

void save_trace(const fs::path& dir, const Trace& t) {
  save_text(dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, t); });
  save_text(dir / "trace.jsonl", [&](std::ostream& os) { write_trace_jsonl(os, t); });
}

void save_rpca_constants(const fs::path& path, const RpcaConfig& cfg, const Trace& t) {
  if (t.empty()) return;
  const double alpha = t.records.back().alpha;
  TraceConstants c;
  c.descent = rpca_descent_constants(cfg, alpha);
  c.sigma1 = c.descent.sigma1(alpha);
  save_text(path, [&](std::ostream& os) {
    os << "# descent constants at alpha = " << format_double(alpha) << '\n';
    write_trace_constants(os, c);
  });
}

std::string fmt(double v) { return format_double(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  InstanceParams inst;
  RpcaConfig rpca;
  std::string out = "simulate_out";
  std::string matrix_format = "bmat";
};

std::string matrix_ext(const std::string& format) {
  if (format == "csv") return ".csv";
  if (format == "bmat") return ".bmat";
  throw ConfigError("matrix_format must be csv or bmat, got '" + format + "'");
}

int run_simulate(const SimulateArgs& a) {
  a.rpca.validate();
  const std::string ext = matrix_ext(a.matrix_format);
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticInstance inst = gen_instance(a.inst);
  const RpcaTruth truth{inst.l_true, inst.s_true};
  const std::map<std::string, std::string> extra = {{"seed", std::to_string(a.inst.seed)},
                                                    {"rank", std::to_string(a.inst.rank)},
                                                    {"sparsity", fmt(a.inst.sparsity)},
                                                    {"magnitude", fmt(a.inst.magnitude)},
                                                    {"sigma", fmt(a.inst.sigma)}};
  const RpcaResult res = rpca_solve(inst.m_obs, a.rpca, &truth, extra);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  save_trace(dir, res.trace);
  save_rpca_constants(dir / "constants.txt", a.rpca, res.trace);
  save_matrix(dir / ("L" + ext), res.state.l);
  save_matrix(dir / ("S" + ext), res.state.s);
  save_matrix(dir / ("T" + ext), res.state.t);
  save_text(dir / "manifest.json", [&](std::ostream& os) { os << instance_manifest(a.inst).dump(2) << '\n'; });

  std::cout << "status: " << to_string(res.status) << '\n' << "iterations: " << res.trace.size() << '\n';
  if (!res.trace.empty()) {
    const auto& r = res.trace.records.back();
    std::cout << "relChg: " << fmt(r.relchg) << '\n'
              << "relErr_L: " << fmt(r.relerr[0]) << '\n'
              << "relErr_S: " << fmt(r.relerr[1]) << '\n'
              << "relErr_T: " << fmt(r.relerr[2]) << '\n'
              << "alpha: " << fmt(r.alpha) << '\n';
  }
  std::cout << "output: " << dir.string() << '\n'
            << "seconds: " << std::fixed << std::setprecision(2) << seconds_since(t0) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// bgsub

struct BgsubArgs {
  std::string frames;
  std::string out = "bgsub_out";
  double pixel_scale = 1.0 / 255.0;
  RpcaConfig rpca;
  BgsubArgs() { rpca.lambda_scale = 50.0; }
};

int run_bgsub(const BgsubArgs& a) {
  if (a.frames.empty()) throw ConfigError("--frames is required");
  if (!(a.pixel_scale > 0.0)) throw ConfigError("pixel_scale must be positive");
  a.rpca.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto paths = list_frames(a.frames);
  if (paths.empty()) throw ConfigError(a.frames + ": no .pgm frames");
  const std::vector<Matrix> frames = load_frames(a.frames);
  const Index h = frames.front().rows();
  const Index w = frames.front().cols();
  const Matrix m_obs = stack_frames(frames, a.pixel_scale);
  const RpcaResult res =
      rpca_solve(m_obs, a.rpca, nullptr, {{"frames", std::to_string(frames.size())}, {"pixel_scale", fmt(a.pixel_scale)}});

  const fs::path dir = a.out;
  fs::create_directories(dir / "background");
  fs::create_directories(dir / "foreground");
  const double smax = res.state.s.cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const Index col = static_cast<Index>(k);
    const auto name = paths[k].filename();
    save_pgm(dir / "background" / name, unstack_frame(res.state.l, col, h, w) / a.pixel_scale);
    Matrix fg = unstack_frame(res.state.s, col, h, w).cwiseAbs();
    if (smax > 0.0) fg *= 255.0 / smax;
    save_pgm(dir / "foreground" / name, fg);
  }
  save_trace(dir, res.trace);

  std::cout << "status: " << to_string(res.status) << '\n'
            << "frames: " << frames.size() << " (" << w << "x" << h << ")\n"
            << "iterations: " << res.trace.size() << '\n'
            << "foreground_ratio: " << fmt(res.state.s.norm() / std::max(m_obs.norm(), 1e-300)) << '\n'
            << "output: " << dir.string() << '\n'
            << "seconds: " << std::fixed << std::setprecision(2) << seconds_since(t0) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  std::string trace;
  std::string constants;
  std::string csv;
};

int run_diagnose(const DiagnoseArgs& a) {
  if (a.trace.empty() || a.constants.empty()) throw ConfigError("--trace and --constants are required");
  std::ifstream tin(a.trace);
  if (!tin) throw IoError("cannot open " + a.trace);
  const Trace t = read_trace_jsonl(tin, a.trace);
  std::ifstream cin_(a.constants);
  if (!cin_) throw IoError("cannot open " + a.constants);
  const TraceConstants c = read_trace_constants(cin_, a.constants);
  const DiagnosticsReport rep = diagnose(t, c.sigma1, c.descent);
  write_report_text(std::cout, rep);
  if (!a.csv.empty()) save_text(a.csv, [&](std::ostream& os) { write_report_csv(os, rep); });
  return rep.passed() ? kOk : kViolation;
}

// ---------------------------------------------------------------------------
// solve-linear

struct LinearArgs {
  std::string blocks;
  std::string gammas;
  std::optional<double> alpha;
  std::string init = "random";
  std::uint64_t seed = 1;
  std::size_t max_iter = 10000;
  double tol = 1e-6;
  double relchg = 0.0;
  std::string out;
};

int run_solve_linear(const LinearArgs& a) {
  const auto files = split_list(a.blocks);
  if (files.empty()) throw ConfigError("--blocks needs at least one matrix file");
  std::vector<Matrix> mats;
  for (const auto& f : files) mats.push_back(load_matrix(f));
  std::vector<double> gammas = a.gammas.empty() ? std::vector<double>(mats.size(), 1.0) : parse_reals(a.gammas, "gammas");
  if (gammas.size() != mats.size()) throw ConfigError("--gammas must list one weight per block");
  for (std::size_t i = 1; i < mats.size(); ++i) {
    if (mats[i].rows() != mats[0].rows()) {
      throw ConfigError(files[i] + ": " + std::to_string(mats[i].rows()) + " rows, expected " +
                        std::to_string(mats[0].rows()));
    }
  }
  ProblemSpec spec = linear_system_spec(mats, gammas, 1.0);
  const ValidationReport probe = validate_alpha(spec, 1.0);
  spec.alpha = a.alpha ? *a.alpha : (probe.threshold > 0.0 ? 2.0 * probe.threshold : 1.0);
  const ValidationReport rep = validate_alpha(spec);
  std::cout << "alpha: " << fmt(spec.alpha) << " (threshold " << fmt(rep.threshold) << ", "
            << (rep.passed ? "above" : "NOT above") << ")\n";

  std::vector<Matrix> x0;
  if (a.init == "random") {
    x0 = linear_system_random_start(mats, a.seed);
  } else if (a.init == "zero") {
    for (const auto& m : mats) x0.push_back(Matrix::Zero(m.cols(), 1));
  } else {
    throw ConfigError("init must be random or zero, got '" + a.init + "'");
  }
  StoppingRule stop;
  stop.max_iterations = a.max_iter;
  stop.relchg_threshold = a.relchg;
  stop.primal_tolerance = a.tol;
  IterateState init = initial_state(spec, x0);
  const double start_res = constraint_residual(spec, init.x).norm();
  RunResult r = run(spec, std::move(init), stop);
  if (r.status == RunStatus::solver_failure) throw NumericError(r.message);
  const double final_res = r.trace.empty() ? start_res : r.trace.records.back().primal_residual;

  if (!a.out.empty()) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < r.final_state.x.size(); ++i) {
      save_matrix(dir / ("x" + std::to_string(i + 1) + ".csv"), r.final_state.x[i]);
    }
    save_trace(dir, r.trace);
  }
  std::cout << "status: " << to_string(r.status) << '\n'
            << "iterations: " << r.trace.size() << '\n'
            << "residual: " << fmt(final_res) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// sweep-mu

struct SweepArgs {
  InstanceParams inst;
  RpcaConfig rpca;
  std::string mus = "0.1,0.2,0.3,0.5,1";
  std::string out;
};

int run_sweep_mu(const SweepArgs& a) {
  const auto mus = parse_reals(a.mus, "mus");
  if (mus.empty()) throw ConfigError("--mus is empty");
  const SyntheticInstance inst = gen_instance(a.inst);
  const RpcaTruth truth{inst.l_true, inst.s_true};
  std::ostringstream table;
  table << "mu,iterations,status,relErr_L,relErr_S\n";
  double best_mu = mus.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double mu : mus) {
    RpcaConfig cfg = a.rpca;
    cfg.mu = mu;
    const RpcaResult res = rpca_solve(inst.m_obs, cfg, &truth);
    const double el = res.trace.empty() ? relerr(res.state.l, truth.l) : res.trace.records.back().relerr[0];
    const double es = res.trace.empty() ? kNaN : res.trace.records.back().relerr[1];
    table << fmt(mu) << ',' << res.trace.size() << ',' << to_string(res.status) << ',' << fmt(el) << ',' << fmt(es)
          << '\n';
    if (el < best_err) {
      best_err = el;
      best_mu = mu;
    }
  }
  std::cout << table.str() << "best: mu = " << fmt(best_mu) << ", relErr_L = " << fmt(best_err) << '\n';
  if (!a.out.empty()) save_text(a.out, [&](std::ostream& os) { os << table.str(); });
  return kOk;
}

// ---------------------------------------------------------------------------
// make-frames

struct FramesArgs {
  std::string out = "frames";
  Index height = 64;
  Index width = 64;
  Index count = 60;
  Index square = 12;
  bool still = false;
  bool masks = false;
};

int run_make_frames(const FramesArgs& a) {
  const FrameSequence seq = moving_square_sequence(a.height, a.width, a.count, a.square, !a.still);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  if (a.masks) fs::create_directories(dir / "masks");
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << k << ".pgm";
    save_pgm(dir / name.str(), seq.frames[k]);
    if (a.masks) save_pgm(dir / "masks" / name.str(), seq.masks[k].cast<double>().matrix() * 255.0);
  }
  std::cout << "wrote " << seq.frames.size() << " frames to " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-block Bregman ADMM: low-rank + sparse decomposition, diagnostics, linear systems"};
  app.require_subcommand(1);

  SimulateArgs sim;
  Command sim_cmd;
  {
    std::vector<ConfigField> f = instance_fields(sim.inst);
    append(f, rpca_config_fields(sim.rpca));
    f.push_back(string_field("out", sim.out));
    f.push_back(string_field("matrix_format", sim.matrix_format));
    sim_cmd.bind(app.add_subcommand("simulate", "generate a synthetic instance and decompose it"), std::move(f));
  }

  BgsubArgs bg;
  Command bg_cmd;
  {
    std::vector<ConfigField> f = {string_field("frames", bg.frames), string_field("out", bg.out),
                                  detail::real_field("pixel_scale", bg.pixel_scale)};
    append(f, rpca_config_fields(bg.rpca));
    bg_cmd.bind(app.add_subcommand("bgsub", "separate background and foreground of PGM frames"), std::move(f));
  }

  DiagnoseArgs dg;
  Command dg_cmd;
  dg_cmd.bind(app.add_subcommand("diagnose", "check descent and multiplier bounds along a trace"),
              {string_field("trace", dg.trace), string_field("constants", dg.constants), string_field("csv", dg.csv)});

  LinearArgs lin;
  Command lin_cmd;
  lin_cmd.bind(app.add_subcommand("solve-linear", "solve A_1 x_1 + ... + A_N x_N = 0 block-wise"),
               {string_field("blocks", lin.blocks), string_field("gammas", lin.gammas),
                detail::optional_field("alpha", lin.alpha), string_field("init", lin.init), u64_field("seed", lin.seed),
                detail::count_field("max_iter", lin.max_iter), detail::real_field("tol", lin.tol),
                detail::real_field("relchg", lin.relchg), string_field("out", lin.out)});

  SweepArgs sw;
  Command sw_cmd;
  {
    std::vector<ConfigField> f = instance_fields(sw.inst);
    append(f, rpca_config_fields(sw.rpca));
    f.push_back(string_field("mus", sw.mus));
    f.push_back(string_field("out", sw.out));
    sw_cmd.bind(app.add_subcommand("sweep-mu", "recovery error over a grid of mu values"), std::move(f));
  }

  FramesArgs fr;
  Command fr_cmd;
  fr_cmd.bind(app.add_subcommand("make-frames", "write a synthetic moving-square PGM sequence"),
              {string_field("out", fr.out), index_field("height", fr.height), index_field("width", fr.width),
               index_field("count", fr.count), index_field("square", fr.square), detail::bool_field("still", fr.still),
               detail::bool_field("masks", fr.masks)});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (sim_cmd.app->parsed()) {
      sim_cmd.apply_config();
      const int rc = run_simulate(sim);
      sim_cmd.write_resolved(fs::path(sim.out) / "config.txt");
      return rc;
    }
    if (bg_cmd.app->parsed()) {
      bg_cmd.apply_config();
      const int rc = run_bgsub(bg);
      bg_cmd.write_resolved(fs::path(bg.out) / "config.txt");
      return rc;
    }
    if (dg_cmd.app->parsed()) {
      dg_cmd.apply_config();
      return run_diagnose(dg);
    }
    if (lin_cmd.app->parsed()) {
      lin_cmd.apply_config();
      return run_solve_linear(lin);
    }
    if (sw_cmd.app->parsed()) {
      sw_cmd.apply_config();
      return run_sweep_mu(sw);
    }
    if (fr_cmd.app->parsed()) {
      fr_cmd.apply_config();
      return run_make_frames(fr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const SolverError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
