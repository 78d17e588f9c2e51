#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "test_support.hpp"

namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

const std::string kData = MAIC_DATA_DIR;

int run(const std::string& args) {
  const std::string cmd = std::string(MAIC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "maic_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(maic::io::read_file(p)); }

}  // namespace

TEST_CASE("analyze two-point fixture", "[cli]") {
  const auto dir = scratch("two_point");
  const auto out = dir / "a.json";
  REQUIRE(run("analyze --ipd " + kData + "/two_point_ipd.csv --ald " + kData +
              "/two_point_ald.json --method MAIC --bootstrap 0 --out " + out.string()) == 0);
  const auto j = read_json(out);
  CHECK_THAT(j["alpha1"][0].get<double>(), WithinAbs(std::log(3.0), 1e-8));
  CHECK_THAT(j["delta_10"].get<double>(), WithinAbs(-2.0, 1e-12));
  CHECK_THAT(j["delta_12"].get<double>(), WithinAbs(-1.8, 1e-12));
  CHECK_THAT(j["ess_trial"].get<double>(), WithinAbs(1.6, 1e-8));
}

TEST_CASE("analyze with bootstrap and diagnostics", "[cli]") {
  const auto dir = scratch("balanced");
  const auto out = dir / "a.json";
  const auto diag = dir / "diag.csv";
  REQUIRE(run("analyze --ipd " + kData + "/balanced_ipd.csv --ald " + kData +
              "/two_point_ald.json --method 2SMAIC --bootstrap 0 --out " + out.string() +
              " --diagnostics " + diag.string()) == 0);
  CHECK_THAT(read_json(out)["delta_10"].get<double>(), WithinAbs(-2.5, 1e-12));
  CHECK(fs::exists(diag));
}

TEST_CASE("analyze exit codes", "[cli]") {
  const auto dir = scratch("codes");
  const std::string ald = " --ald " + kData + "/two_point_ald.json";
  CHECK(run("analyze --ipd " + kData + "/separated_ipd.csv" + ald) == 2);
  CHECK(run("analyze --ipd " + kData + "/two_point_ipd.csv" + ald + " --method XYZ") == 1);
  CHECK(run("analyze --ipd " + (dir / "missing.csv").string() + ald) == 1);
  CHECK(run("analyze --ipd " + kData + "/two_point_ipd.csv" + ald + " --no-such-flag") == 1);

  const auto bad = maic::test::temp_file("blank.csv", "treatment,outcome,x1\n1,,0\n0,5,1\n");
  CHECK(run("analyze --ipd " + bad.string() + ald) == 1);
  CHECK(run("validate --ipd " + bad.string()) == 1);
  CHECK(run("validate --ipd " + kData + "/two_point_ipd.csv" + ald) == 0);
  CHECK(run("validate --ipd " + kData + "/separated_ipd.csv" + ald) == 2);
}

TEST_CASE("simulate is deterministic across thread counts", "[cli]") {
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  const std::string common = "simulate --replicates 10 --bootstrap 50 --quiet --seed 5 --out ";
  REQUIRE(run(common + a.string() + " --threads 1") == 0);
  REQUIRE(run(common + b.string() + " --threads 4") == 0);
  for (const char* f : {"metrics.csv", "estimates.csv", "manifest.json"}) {
    CHECK(maic::io::read_file(a / f) == maic::io::read_file(b / f));
  }
  const auto metrics = maic::io::read_file(a / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 25);

  const auto recomputed = a / "recomputed.csv";
  REQUIRE(run("metrics --estimates " + (a / "estimates.csv").string() + " --out " + recomputed.string()) == 0);
  CHECK(maic::io::read_file(recomputed) == metrics);

  const auto manifest = read_json(a / "manifest.json");
  CHECK(manifest.contains("config_hash_fnv1a64"));
}
