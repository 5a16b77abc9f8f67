#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "betlab/cli.hpp"
#include "betlab/errors.hpp"

using namespace betlab;
using namespace betlab::cli;
using nlohmann::json;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("betlab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("manifest parsing") {
  CHECK_THROWS_AS(parse_manifest(json{{"suite", "thm1_sweep"}}), ConfigError);  // no seed
  CHECK_THROWS_AS(parse_manifest(json{{"seed", 1}}), ConfigError);              // no suite
  CHECK_THROWS_AS(parse_manifest(json{{"suite", "x"}, {"seed", 1}, {"bogus", 2}}), ConfigError);
  CHECK_THROWS_AS(parse_manifest(json::array()), ConfigError);

  const auto m = parse_manifest(json{{"suite", "thm1_sweep"}, {"seed", 9}, {"jobs", 2}});
  CHECK(m.suite == "thm1_sweep");
  CHECK(m.seed == 9);
  CHECK(m.jobs == 2);
  CHECK(m.out_dir == ".");
}

TEST_CASE("suite listing is stable and complete") {
  const auto text = list_suites_text();
  for (const char* name : {"thm1_sweep", "thm5_grid", "thm6_psr", "thm7_alias", "corollaries",
                           "counterexamples", "thm4_necessity"}) {
    CHECK(text.find(name) != std::string::npos);
  }
  CHECK(text == list_suites_text());
}

TEST_CASE("unknown suite and domain errors exit 1") {
  const auto dir = fresh_dir("exit1");
  CHECK(run_manifest(json{{"suite", "nope"}, {"seed", 1}, {"out", dir.string()}}) == 1);

  // Margin outside (0, 1/2] is a configuration-level diagnostic.
  const json bad_gamma{{"suite", "thm1_sweep"},
                       {"seed", 1},
                       {"out", dir.string()},
                       {"sweep", {{"n", {10}}, {"epsilon", {0.0}}, {"gamma", {0.6}}}}};
  CHECK(run_manifest(bad_gamma) == 1);
}

TEST_CASE("assumption violations exit 2") {
  const auto dir = fresh_dir("exit2");
  const json manifest{{"suite", "thm6_psr"},
                      {"seed", 3},
                      {"out", dir.string()},
                      {"environment", {{"builder", "random_pomdp"}}}};
  CHECK(run_manifest(manifest) == 2);
  const auto csv = slurp(dir / "results.csv");
  CHECK(csv.find("linear_update_violated") != std::string::npos);
}

TEST_CASE("clean runs exit 0 and write the three artifacts") {
  const auto dir = fresh_dir("exit0");
  const json manifest{{"suite", "counterexamples"}, {"seed", 1}, {"out", dir.string()}};
  CHECK(run_manifest(manifest) == 0);
  CHECK(std::filesystem::exists(dir / "results.csv"));
  CHECK(std::filesystem::exists(dir / "estimates.csv"));
  CHECK(std::filesystem::exists(dir / "manifest-echo.json"));

  const auto csv = slurp(dir / "results.csv");
  CHECK(csv.rfind("theorem,seed,gamma,n,K,epsilon,lhs,rhs,slack,satisfied,vacuous,"
                  "assumption_flags,notes\n",
                  0) == 0);
  CHECK(csv.find("prop1") != std::string::npos);
  CHECK(csv.find("cor2") != std::string::npos);
}

TEST_CASE("reruns are byte identical") {
  const auto dir1 = fresh_dir("det1");
  const auto dir2 = fresh_dir("det2");
  const json manifest{{"suite", "thm5_grid"},
                      {"seed", 21},
                      {"sweep", {{"K", {1, 4}}, {"epsilon", {0.0, 0.1}}}}};
  auto with_out = [&](const std::filesystem::path& d) {
    json m = manifest;
    m["out"] = d.string();
    return m;
  };
  CHECK(run_manifest(with_out(dir1)) == 0);
  CHECK(run_manifest(with_out(dir2)) == 0);
  CHECK(slurp(dir1 / "results.csv") == slurp(dir2 / "results.csv"));
  CHECK(slurp(dir1 / "estimates.csv") == slurp(dir2 / "estimates.csv"));
}

TEST_CASE("parallel runs match the serial bytes") {
  const auto dir1 = fresh_dir("jobs1");
  const auto dir4 = fresh_dir("jobs4");
  const json manifest{{"suite", "thm1_sweep"},
                      {"seed", 13},
                      {"sweep", {{"n", {10, 20}}, {"epsilon", {0.0, 0.05}}, {"gamma", {0.25}}}}};
  json serial = manifest;
  serial["out"] = dir1.string();
  serial["jobs"] = 1;
  json parallel = manifest;
  parallel["out"] = dir4.string();
  parallel["jobs"] = 4;
  CHECK(run_manifest(serial) == 0);
  CHECK(run_manifest(parallel) == 0);
  CHECK(slurp(dir1 / "results.csv") == slurp(dir4 / "results.csv"));
  CHECK(slurp(dir1 / "estimates.csv") == slurp(dir4 / "estimates.csv"));
}

TEST_CASE("seed overrides flow into the digest column") {
  const auto dir = fresh_dir("seed_override");
  const json manifest{{"suite", "counterexamples"}, {"seed", 1}, {"out", dir.string()}};
  RunOverrides overrides;
  overrides.seed = 777;
  CHECK(run_manifest(manifest, overrides) == 0);
  CHECK(slurp(dir / "results.csv").find(",777,") != std::string::npos);
  CHECK(slurp(dir / "manifest-echo.json").find("777") != std::string::npos);
}

TEST_CASE("bundled names resolve through the path runner") {
  const auto dir = fresh_dir("bundled");
  RunOverrides overrides;
  overrides.out_dir = dir.string();
  CHECK(run_manifest_path("counterexamples", overrides) == 0);
  CHECK(run_manifest_path("definitely_not_a_manifest", overrides) == 1);
}
