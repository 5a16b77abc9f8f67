#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "betlab/verifier.hpp"

namespace betlab::cli {

// A manifest fully determines every output byte given the same build.
struct Manifest {
  std::string suite;
  uint64_t seed = 0;
  std::string out_dir = ".";
  int jobs = 1;
  nlohmann::json environment;  // builder tag or inline tables; may be null
  nlohmann::json policy;       // may be null
  nlohmann::json evaluation;   // may be null
  nlohmann::json sweep;        // axis lists; may be null
  nlohmann::json effective;    // the manifest as echoed back
};

// Throws ConfigError on missing/ill-typed fields. The seed is mandatory.
Manifest parse_manifest(const nlohmann::json& j);

struct EstimateRow {
  std::string cell;
  double estimate = 0.0;
  double truth = 0.0;
  double abs_error = 0.0;
};

struct SuiteResult {
  std::vector<verifier::BoundReport> reports;
  std::vector<EstimateRow> estimates;
};

// Dispatches on manifest.suite; ConfigError for unknown suites.
SuiteResult run_suite(const Manifest& manifest);

// Bundled manifests in stable order.
const std::vector<std::pair<std::string, nlohmann::json>>& bundled_manifests();

// One line per bundled suite: name, then what it certifies.
std::string list_suites_text();

std::string results_csv(const std::vector<verifier::BoundReport>& reports);
std::string estimates_csv(const std::vector<EstimateRow>& rows);

struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
};

// Runs a manifest and writes results.csv, estimates.csv, manifest-echo.json
// into the output directory. Exit code 0: every non-vacuous bound satisfied
// and no assumption flags; 2: a violated bound or a dirty flag; 1:
// configuration error.
int run_manifest(const nlohmann::json& manifest_json, const RunOverrides& overrides = {});

// Accepts a path to a JSON manifest or the name of a bundled one.
int run_manifest_path(const std::string& path_or_name, const RunOverrides& overrides = {});

}  // namespace betlab::cli
