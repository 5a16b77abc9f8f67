#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "betlab/cli.hpp"
#include "betlab/errors.hpp"

namespace betlab::cli {

using nlohmann::json;

namespace {

// Fixed 12-significant-digit rendering keeps the CSVs diffable.
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }
std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }

std::string joined(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += '|';
    out += p;
  }
  return out;
}

}  // namespace

std::string results_csv(const std::vector<verifier::BoundReport>& reports) {
  std::string out =
      "theorem,seed,gamma,n,K,epsilon,lhs,rhs,slack,satisfied,vacuous,assumption_flags,notes\n";
  for (const auto& r : reports) {
    out += r.theorem;
    out += ',';
    out += std::to_string(r.inputs.seed);
    out += ',';
    out += opt_num(r.inputs.gamma);
    out += ',';
    out += opt_int(r.inputs.n);
    out += ',';
    out += opt_int(r.inputs.K);
    out += ',';
    out += opt_num(r.inputs.epsilon);
    out += ',';
    out += num(r.lhs);
    out += ',';
    out += num(r.rhs);
    out += ',';
    out += num(r.slack);
    out += ',';
    out += r.satisfied ? '1' : '0';
    out += ',';
    out += r.vacuous ? '1' : '0';
    out += ',';
    out += joined(r.flags);
    out += ',';
    out += joined(r.notes);
    out += '\n';
  }
  return out;
}

std::string estimates_csv(const std::vector<EstimateRow>& rows) {
  std::string out = "cell,estimate,truth,abs_error\n";
  for (const auto& r : rows) {
    out += r.cell;
    out += ',';
    out += num(r.estimate);
    out += ',';
    out += num(r.truth);
    out += ',';
    out += num(r.abs_error);
    out += '\n';
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
  f << content;
}

int exit_code_for(const std::vector<verifier::BoundReport>& reports) {
  int code = 0;
  for (const auto& r : reports) {
    if (!r.flags.empty()) code = 2;
    if (!r.vacuous && !r.satisfied) code = 2;
  }
  return code;
}

}  // namespace

int run_manifest(const json& manifest_json, const RunOverrides& overrides) {
  Manifest manifest;
  SuiteResult result;
  try {
    json effective = manifest_json;
    if (overrides.seed) effective["seed"] = *overrides.seed;
    if (overrides.out_dir) effective["out"] = *overrides.out_dir;
    if (overrides.jobs) effective["jobs"] = *overrides.jobs;
    if (!effective.contains("out")) {
      if (const char* env_out = std::getenv("BETLAB_OUT")) effective["out"] = env_out;
    }
    manifest = parse_manifest(effective);
    result = run_suite(manifest);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  }

  try {
    const std::filesystem::path out_dir(manifest.out_dir);
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "results.csv", results_csv(result.reports));
    write_file(out_dir / "estimates.csv", estimates_csv(result.estimates));
    write_file(out_dir / "manifest-echo.json", manifest.effective.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return 1;
  }
  return exit_code_for(result.reports);
}

int run_manifest_path(const std::string& path_or_name, const RunOverrides& overrides) {
  for (const auto& [name, manifest] : bundled_manifests()) {
    if (name == path_or_name) return run_manifest(manifest, overrides);
  }
  std::ifstream f(path_or_name);
  if (!f) {
    std::cerr << "configuration error: \"" << path_or_name
              << "\" is neither a readable file nor a bundled manifest\n";
    return 1;
  }
  json parsed;
  try {
    f >> parsed;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  }
  return run_manifest(parsed, overrides);
}

}  // namespace betlab::cli
