#include <optional>
#include <string>

#include <CLI11.hpp>

#include "betlab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"betlab: deterministic bound-verification experiments on finite environments"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::string out_dir;
  uint64_t seed = 0;
  int jobs = 0;

  auto* run = app.add_subcommand("run", "run a manifest (path or bundled name)");
  run->add_option("manifest", manifest_path, "manifest file or bundled suite name")->required();
  auto* out_opt = run->add_option("--out", out_dir, "output directory (overrides manifest)");
  auto* seed_opt = run->add_option("--seed", seed, "seed override");
  auto* jobs_opt = run->add_option("--jobs", jobs, "worker threads");

  auto* list = app.add_subcommand("list", "list bundled suites");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    std::fputs(betlab::cli::list_suites_text().c_str(), stdout);
    return 0;
  }

  betlab::cli::RunOverrides overrides;
  if (*out_opt) overrides.out_dir = out_dir;
  if (*seed_opt) overrides.seed = seed;
  if (*jobs_opt) overrides.jobs = jobs;
  return betlab::cli::run_manifest_path(manifest_path, overrides);
}
