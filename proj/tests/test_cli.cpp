// End-to-end checks of the command-line tool: exit codes, output files,
// byte-identical reruns. The binary path comes in via PISTON_CLI.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli() {
#ifdef PISTON_CLI
  return PISTON_CLI;
#else
  return "piston";
#endif
}

int run(const std::string& args) {
  std::string cmd = cli() + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "piston_cli_test" / leaf;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("unknown subcommand fails with usage", "[cli]") {
  CHECK(run("transmogrify") != 0);
}

TEST_CASE("malformed config exits with code 1", "[cli]") {
  fs::path dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"mass\": }";
  CHECK(run("simulate-1d --config " + (dir / "bad.json").string() + " --out " +
            (dir / "out").string()) == 1);
}

TEST_CASE("mechanical equilibrium gives a constant averaged trajectory",
          "[cli]") {
  fs::path dir = scratch("equilibrium");
  fs::create_directories(dir);
  // P1 = 2 E1/Q = P2 = 2 E2/(1-Q) at Q = 0.4
  std::ofstream(dir / "cfg.json")
      << R"({"system":"hard1d","Q0":0.4,"W0":0.0,"E1":[0.4],"E2":[0.6],"tauEnd":2.0})";
  REQUIRE(run("average --config " + (dir / "cfg.json").string() + " --out " +
              (dir / "out").string()) == 0);
  std::ifstream is(dir / "out" / "trajectory.csv");
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "tau,Q,W,E1_1,E2_1,Heff");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    auto first = line.find(',');
    auto second = line.find(',', first + 1);
    double q = std::stod(line.substr(first + 1, second - first - 1));
    CHECK(std::abs(q - 0.4) < 1e-9);
  }
  CHECK(rows > 100);
}

TEST_CASE("identical config and seed give identical bytes", "[cli]") {
  fs::path a = scratch("repro_a"), b = scratch("repro_b");
  std::string common = "study convergence-1d --seed 7 --threads 1";
  fs::path cfgfile = scratch("repro_cfg");
  fs::create_directories(cfgfile);
  std::ofstream(cfgfile / "c.json")
      << R"({"masses":[100.0,1000.0,10000.0],"seeds":4})";
  std::string with_cfg = " --config " + (cfgfile / "c.json").string();
  REQUIRE(run(common + with_cfg + " --out " + a.string()) == 0);
  REQUIRE(run(common + with_cfg + " --out " + b.string()) == 0);
  CHECK(slurp(a / "convergence_1d.csv") == slurp(b / "convergence_1d.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
}

TEST_CASE("numerical failure exits with code 2", "[cli]") {
  fs::path dir = scratch("blowup");
  fs::create_directories(dir);
  // a step so large the invariant guard rejects it even after six halvings
  std::ofstream(dir / "cfg.json")
      << R"({"system":"hard1d","Q0":0.5,"E1":[0.605],"E2":[0.405],"step":50.0})";
  CHECK(run("average --config " + (dir / "cfg.json").string() + " --out " +
            (dir / "out").string()) == 2);
}

TEST_CASE("custom JSON boundary domains are accepted", "[cli]") {
  fs::path dir = scratch("custom_domain");
  fs::create_directories(dir);
  // the unit square as an explicit segment list
  std::ofstream(dir / "cfg.json") << R"({
    "domain": {"ell": 1.0, "segments": [
      {"ax": 0, "ay": 0, "bx": 1, "by": 0},
      {"ax": 1, "ay": 0, "bx": 1, "by": 1},
      {"ax": 1, "ay": 1, "bx": 0, "by": 1},
      {"ax": 0, "ay": 1, "bx": 0, "by": 0}]},
    "Q": 1.0, "samples": 20000})";
  REQUIRE(run("study santalo --config " + (dir / "cfg.json").string() +
              " --out " + dir.string()) == 0);
  std::string summary = slurp(dir / "summary.json");
  CHECK(summary.find("0.785398163397448") != std::string::npos);
}

TEST_CASE("santalo study reports the predicted value", "[cli]") {
  fs::path dir = scratch("santalo");
  REQUIRE(run("study santalo --preset box-unit --samples 20000 --out " +
              dir.string()) == 0);
  std::string summary = slurp(dir / "summary.json");
  CHECK(summary.find("santalo_predicted") != std::string::npos);
  CHECK(summary.find("0.785398163397448") != std::string::npos);  // pi/4
  CHECK(fs::exists(dir / "manifest.json"));
}
