#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "badmm/matrix_io.hpp"
#include "badmm/trace.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

fs::path work_dir(const std::string& name) {
  const fs::path d = fs::path(::testing::TempDir()) / ("badmm_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI with stdout and stderr captured together.
Result cli(const fs::path& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = "cd '" + dir.string() + "' && '" BADMM_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const fs::path d = work_dir("help");
  EXPECT_EQ(cli(d, "--help").code, 0);
  EXPECT_EQ(cli(d, "").code, 2);
  EXPECT_EQ(cli(d, "simulate --no-such-flag 1").code, 2);
  const auto bad = cli(d, "simulate --mu abc");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("--mu"), std::string::npos);
}

TEST(Cli, SimulateZeroIterations) {
  const fs::path d = work_dir("sim0");
  const auto r = cli(d, "simulate --m 20 --max-iter 0 --out run");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("iterations: 0"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "run" / "trace.csv"));
  EXPECT_TRUE(fs::exists(d / "run" / "L.bmat"));
  // L is the rank-1 initializer
  const auto l = badmm::load_matrix(d / "run" / "L.bmat");
  EXPECT_EQ(l.rows(), 20);
}

TEST(Cli, SimulateIsReproducible) {
  const fs::path d = work_dir("simrep");
  ASSERT_EQ(cli(d, "simulate --m 30 --max-iter 40 --sigma 0.1 --out a").code, 0);
  ASSERT_EQ(cli(d, "simulate --m 30 --max-iter 40 --sigma 0.1 --out b --matrix-format csv").code, 0);
  const std::string ta = slurp(d / "a" / "trace.csv");
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, slurp(d / "b" / "trace.csv"));
  EXPECT_EQ(badmm::load_matrix(d / "a" / "S.bmat"), badmm::load_matrix(d / "b" / "S.csv"));
  EXPECT_NE(ta.find("# seed=42"), std::string::npos);
}

TEST(Cli, ConfigFileAndOverride) {
  const fs::path d = work_dir("config");
  std::ofstream(d / "run.cfg") << "m = 16\nmax_iter = 5\nout = fromcfg\n";
  const auto r = cli(d, "simulate --config run.cfg --max-iter 3");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("iterations: 3"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "fromcfg" / "config.txt"));
  std::ofstream(d / "bad.cfg") << "m = 16\n\nthis line is wrong\n";
  const auto bad = cli(d, "simulate --config bad.cfg");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("bad.cfg:3"), std::string::npos) << bad.out;
}

TEST(Cli, DiagnoseValidAndViolatedTraces) {
  const fs::path d = work_dir("diag");
  ASSERT_EQ(cli(d, "simulate --m 12 --mu 10 --gamma1 60 --gamma2 1 --alpha0 60 --dynamic-alpha false "
                   "--relchg-threshold 0 --max-iter 100 --out fixed")
                .code,
            0);
  const auto ok = cli(d, "diagnose --trace fixed/trace.jsonl --constants fixed/constants.txt --csv margins.csv");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("verdict: pass"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "margins.csv"));

  badmm::Trace t;
  t.block_names = {"x"};
  for (std::size_t k = 1; k <= 3; ++k) {
    badmm::StepRecord r;
    r.iteration = k;
    r.alpha = 1;
    r.lhat_prev = 1;
    r.lhat = 2;  // merit went up
    r.block_steps = {0};
    r.multiplier_step = 0;
    r.prev_last_step = 0;
    t.records.push_back(r);
  }
  {
    std::ofstream out(d / "bad.jsonl");
    badmm::write_trace_jsonl(out, t);
  }
  std::ofstream(d / "c.txt") << "sigma1 = 0.1\nsigma_c = 1\nell_h = 1\nell_phi = 0\n";
  const auto bad = cli(d, "diagnose --trace bad.jsonl --constants c.txt");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("VIOLATED"), std::string::npos);

  t.records.clear();
  {
    std::ofstream out(d / "empty.jsonl");
    badmm::write_trace_jsonl(out, t);
  }
  const auto empty = cli(d, "diagnose --trace empty.jsonl --constants c.txt");
  EXPECT_EQ(empty.code, 0);
  EXPECT_NE(empty.out.find("no iterations"), std::string::npos);
  EXPECT_EQ(cli(d, "diagnose --trace missing.jsonl --constants c.txt").code, 2);
}

TEST(Cli, SolveLinear) {
  const fs::path d = work_dir("linear");
  badmm::save_matrix(d / "eye.csv", badmm::Matrix::Identity(3, 3));
  const auto zero = cli(d, "solve-linear --blocks eye.csv --init zero");
  ASSERT_EQ(zero.code, 0) << zero.out;
  EXPECT_NE(zero.out.find("residual: 0\n"), std::string::npos);

  badmm::Matrix a(3, 2);
  a << 1, 2, -1, 0.5, 3, 1;
  badmm::Matrix c(3, 3);
  c << 4, 1, 0, 1, 3, 1, 0, 1, 5;
  badmm::save_matrix(d / "a.csv", a);
  badmm::save_matrix(d / "c.csv", c);
  const auto two = cli(d, "solve-linear --blocks a.csv,c.csv --out sol");
  ASSERT_EQ(two.code, 0) << two.out;
  EXPECT_NE(two.out.find("status: converged"), std::string::npos) << two.out;
  const auto x1 = badmm::load_matrix(d / "sol" / "x1.csv");
  const auto x2 = badmm::load_matrix(d / "sol" / "x2.csv");
  EXPECT_LE((a * x1 + c * x2).norm(), 1e-6);

  badmm::Matrix s(3, 3);
  s << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  badmm::save_matrix(d / "s.csv", s);
  const auto sing = cli(d, "solve-linear --blocks a.csv,s.csv");
  EXPECT_EQ(sing.code, 2);
  EXPECT_NE(sing.out.find("singular"), std::string::npos);
}

TEST(Cli, Bgsub) {
  const fs::path d = work_dir("bgsub");
  fs::create_directories(d / "none");
  EXPECT_EQ(cli(d, "bgsub --frames none").code, 2);
  EXPECT_EQ(cli(d, "bgsub --frames does_not_exist").code, 2);
  ASSERT_EQ(cli(d, "make-frames --out still --height 16 --width 16 --count 8 --still true").code, 0);
  const auto r = cli(d, "bgsub --frames still --out bg --max-iter 300");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(d / "bg" / "background" / "frame_0000.pgm"));
  EXPECT_TRUE(fs::exists(d / "bg" / "foreground" / "frame_0007.pgm"));
  const auto pos = r.out.find("foreground_ratio: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(pos + 18)), 1e-2);
}

TEST(Cli, SweepMu) {
  const fs::path d = work_dir("sweep");
  const auto r = cli(d, "sweep-mu --m 20 --sigma 0.2 --mus 0.5,1 --max-iter 50");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mu,iterations,status,relErr_L,relErr_S\n0.5,50,"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("best: mu = "), std::string::npos);
  EXPECT_EQ(cli(d, "sweep-mu --mus x").code, 2);
}
