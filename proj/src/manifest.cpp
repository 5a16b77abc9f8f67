#include <map>

#include "betlab/cli.hpp"
#include "betlab/errors.hpp"

namespace betlab::cli {

using nlohmann::json;

Manifest parse_manifest(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  Manifest m;
  if (!j.contains("suite") || !j["suite"].is_string()) {
    throw ConfigError("manifest needs a \"suite\" string");
  }
  m.suite = j["suite"].get<std::string>();
  if (!j.contains("seed") || !j["seed"].is_number()) {
    throw ConfigError("manifest needs a numeric \"seed\" (runs must be reproducible)");
  }
  m.seed = j["seed"].get<uint64_t>();
  m.out_dir = j.value("out", std::string("."));
  m.jobs = j.value("jobs", 1);
  if (m.jobs < 1) throw ConfigError("\"jobs\" must be >= 1");
  m.environment = j.value("environment", json());
  m.policy = j.value("policy", json());
  m.evaluation = j.value("evaluation", json());
  m.sweep = j.value("sweep", json());
  for (const auto& [key, _] : j.items()) {
    if (key != "suite" && key != "seed" && key != "out" && key != "jobs" &&
        key != "environment" && key != "policy" && key != "evaluation" && key != "sweep") {
      throw ConfigError("unknown manifest field \"" + key + "\"");
    }
  }

  m.effective = {
      {"suite", m.suite}, {"seed", m.seed},       {"out", m.out_dir},
      {"jobs", m.jobs},   {"environment", m.environment}, {"policy", m.policy},
      {"evaluation", m.evaluation}, {"sweep", m.sweep},
  };
  return m;
}

namespace {

std::vector<std::pair<std::string, json>> make_bundled() {
  std::vector<std::pair<std::string, json>> out;
  out.emplace_back("corollaries", json{
                                      {"suite", "corollaries"},
                                      {"seed", 5},
                                  });
  out.emplace_back("counterexamples", json{
                                          {"suite", "counterexamples"},
                                          {"seed", 1},
                                      });
  out.emplace_back("thm1_sweep",
                   json{
                       {"suite", "thm1_sweep"},
                       {"seed", 20260811},
                       {"sweep",
                        {{"n", {10, 20, 50, 100, 200}},
                         {"epsilon", {0.0, 0.01, 0.02, 0.05, 0.1}},
                         {"gamma", {0.25}}}},
                   });
  out.emplace_back("thm4_necessity",
                   json{
                       {"suite", "thm4_necessity"},
                       {"seed", 42},
                       {"evaluation", {{"history_length", 1}, {"test_depth", 2}}},
                       {"sweep",
                        {{"gamma", {0.1, 0.25, 0.4}}, {"epsilon", {0.0, 0.01, 0.05, 0.1}}}},
                   });
  out.emplace_back("thm5_grid",
                   json{
                       {"suite", "thm5_grid"},
                       {"seed", 7},
                       {"evaluation", {{"history_length", 1}, {"test_depth", 2}}},
                       {"sweep", {{"K", {1, 2, 4, 8, 16, 32, 64}}, {"epsilon", {0.0, 0.05, 0.1}}}},
                   });
  out.emplace_back("thm6_psr", json{
                                   {"suite", "thm6_psr"},
                                   {"seed", 1},
                               });
  out.emplace_back("thm7_alias", json{
                                     {"suite", "thm7_alias"},
                                     {"seed", 11},
                                     {"sweep", {{"configs", 20}}},
                                 });
  return out;
}

const std::map<std::string, std::string>& suite_descriptions() {
  static const std::map<std::string, std::string> descriptions = {
      {"corollaries",
       "cor1 do-kernel budget, cor3 per-block alias bounds, cor4 regime-mismatch bound, cor5 "
       "memory relabeling equivalence"},
      {"counterexamples",
       "prop1 identical optimal bets with distinct predictive states; cor2 equal interventional "
       "kernels with differing counterfactuals"},
      {"thm1_sweep", "thm1 transition-model recovery error bound over an (n, epsilon) grid"},
      {"thm4_necessity",
       "thm4 restricted wrong-mass bound on fair bets over seeded partially observed environments"},
      {"thm5_grid",
       "thm5 threshold-bet predictive-state squared-error bound over a (K, epsilon) grid"},
      {"thm6_psr",
       "thm6 linear predictive-operator recovery: matrix error bounds and the invertibility gate"},
      {"thm7_alias",
       "thm7 aliasing lower bound: tight two-history instance plus randomized memory maps"},
  };
  return descriptions;
}

}  // namespace

const std::vector<std::pair<std::string, json>>& bundled_manifests() {
  static const auto bundled = make_bundled();
  return bundled;
}

std::string list_suites_text() {
  std::string out;
  for (const auto& [name, manifest] : bundled_manifests()) {
    out += name;
    out += "\n    ";
    out += suite_descriptions().at(name);
    out += "\n";
  }
  return out;
}

}  // namespace betlab::cli
