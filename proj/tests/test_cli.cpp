#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fpnet/cli.hpp"
#include "fpnet/config.hpp"
#include "fpnet/engine.hpp"
#include "fpnet/experiments.hpp"
#include "support.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fpnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

std::string write_config(const std::string& dir, const std::string& text) {
  const std::string path = dir + "/c.cfg";
  std::ofstream(path) << text;
  return path;
}

const char* kConvex =
    "[operators]\nsuite = strongly_convex\n"
    "[oracle]\nnoise_total_variance = 0.01\n"
    "[compression]\nkind = c1\n"
    "[scheduling]\nstep = inv_linear\na = 500\nb = 8\ngamma = 0.8\n"
    "[engine]\nhorizon = 80\nrun_id = tiny\n";

}  // namespace

TEST_CASE("parse_seed_list") {
  CHECK(parse_seed_list("3") == std::vector<unsigned long long>{3});
  CHECK(parse_seed_list("1,4,9") == std::vector<unsigned long long>{1, 4, 9});
  const auto range = parse_seed_list("1-20");
  REQUIRE(range.size() == 20);
  CHECK(range.front() == 1);
  CHECK(range.back() == 20);
  CHECK(parse_seed_list("2-3,7") == std::vector<unsigned long long>{2, 3, 7});
  for (const char* bad : {"", "a", "3-1", "1,,2", "-4", "1.5", "2-"}) CHECK_THROWS_AS(parse_seed_list(bad), ParseError);
}

TEST_CASE("cli: usage errors exit 64") {
  Result r = cli({});
  CHECK(r.code == 64);
  CHECK(r.err.rfind("error usage: ", 0) == 0);
  r = cli({"bogus"});
  CHECK(r.code == 64);
  r = cli({"run"});
  CHECK(r.code == 64);
  CHECK(contains(r.err, "--config"));
  r = cli({"run", "--config", "x", "--frobnicate"});
  CHECK(r.code == 64);
  r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(contains(r.out, "validate-params"));
}

TEST_CASE("cli: library errors print one coded line and exit 2") {
  const std::string dir = test::temp_dir("cli_err");
  Result r = cli({"run", "--config", dir + "/missing.cfg"});
  CHECK(r.code == 2);
  CHECK(r.err == "error io: cannot read config " + dir + "/missing.cfg\n");

  const std::string cfg = write_config(dir, "[engine]\nhorizon = 5\nhorizon = 6\n");
  r = cli({"validate-params", "--config", cfg});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error parse: " + cfg + ":3:", 0) == 0);

  const std::string ok = write_config(dir, kConvex);
  r = cli({"validate-params", "--config", ok, "--set", "scheduling.nope=1"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error parse: ", 0) == 0);

  r = cli({"validate-params", "--config", ok, "--set", "network.n_agents=4"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error invalid-parameter: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  r = cli({"sweep", "--config", ok, "--grid", "scheduling.h", "--out-dir", dir});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error parse: ", 0) == 0);
}

TEST_CASE("cli: validate-params reports both theorems") {
  const std::string dir = test::temp_dir("cli_val");
  const Result r = cli({"validate-params", "--config", write_config(dir, kConvex)});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("governing theorem2 status=", 0) == 0);
  CHECK(contains(r.out, "theorem1"));
  CHECK(contains(r.out, "resolved gamma=0.8"));
  CHECK(contains(r.out, "resolved x_star_norm="));
}

TEST_CASE("cli: validator FAIL refuses to run unless allowed") {
  const std::string dir = test::temp_dir("cli_gate");
  const std::string cfg = write_config(dir, std::string(kConvex) + "");
  Result r = cli({"run", "--config", cfg, "--set", "operators.suite=nonconvex", "--out-dir", dir});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error validator-fail: theorem2 FAIL on ", 0) == 0);
  CHECK(contains(r.err, "contractive_L"));
  CHECK_FALSE(fs::exists(dir + "/tiny.csv"));

  r = cli({"run", "--config", cfg, "--set", "operators.suite=nonconvex", "--allow-warn", "--out-dir", dir});
  CHECK(r.code == 0);
  CHECK(contains(r.err, "WARNING: theorem2 status=FAIL"));
  CHECK(fs::exists(dir + "/tiny.csv"));
}

TEST_CASE("cli: run writes CSV and sidecar, byte-identical on rerun") {
  const std::string a = test::temp_dir("cli_run_a");
  const std::string b = test::temp_dir("cli_run_b");
  const std::string cfg = write_config(a, kConvex);
  Result r = cli({"run", "--config", cfg, "--seed", "5", "--out-dir", a});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("run tiny status=ok rows=81 ", 0) == 0);
  cli({"run", "--config", cfg, "--seed", "5", "--out-dir", b});
  CHECK(slurp(a + "/tiny.csv") == slurp(b + "/tiny.csv"));
  CHECK(slurp(a + "/tiny.sidecar") == slurp(b + "/tiny.sidecar"));
  CHECK(slurp(a + "/tiny.csv").rfind(kTraceHeader, 0) == 0);
  const Sidecar s = parse_sidecar(slurp(a + "/tiny.sidecar"));
  CHECK(s.config.get("engine", "seed") == "5");

  // The sidecar alone reproduces the run.
  const std::string c = test::temp_dir("cli_run_c");
  std::ofstream(c + "/echo.cfg") << s.config.to_text();
  REQUIRE(cli({"run", "--config", c + "/echo.cfg", "--out-dir", c}).code == 0);
  CHECK(slurp(c + "/tiny.csv") == slurp(a + "/tiny.csv"));

  r = cli({"run", "--config", cfg, "--seed", "6", "--out-dir", b});
  CHECK(slurp(a + "/tiny.csv") != slurp(b + "/tiny.csv"));
}

TEST_CASE("cli: sweep writes a manifest") {
  const std::string dir = test::temp_dir("cli_sweep");
  const std::string cfg = write_config(dir, kConvex);
  const Result r = cli({"sweep", "--config", cfg, "--grid", "compression.kind=c1,c2", "--seeds", "1-2", "--out-dir",
                        dir, "--no-verdicts"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("sweep status=ok entries=8 ", 0) == 0);
  const Manifest m = parse_manifest(slurp(dir + "/manifest.txt"));
  CHECK(m.name == "sweep");
  CHECK(m.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(m.entries.size() == 8);
  for (const auto& e : m.entries) CHECK(sha256_file(dir + "/" + e.path) == e.sha256);
  CHECK(fs::exists(dir + "/kind-c2_seed2.csv"));
}

TEST_CASE("cli: fixpoint and certify") {
  const std::string dir = test::temp_dir("cli_fix");
  const std::string cfg = write_config(dir, kConvex);
  Result r = cli({"fixpoint", "--config", cfg});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("fixpoint residual=", 0) == 0);
  CHECK(contains(r.out, "\nx = "));

  r = cli({"certify", "--config", cfg, "--trials", "400"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error invalid-parameter: ", 0) == 0);

  r = cli({"certify", "--config", cfg});
  CHECK(r.code == 0);
  CHECK(contains(r.out, "sampler gaussian"));
  CHECK(contains(r.out, "agent 5"));
  CHECK(contains(r.out, "certify status=PASS"));
}
