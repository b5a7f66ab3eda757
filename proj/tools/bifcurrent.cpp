#include "bifcurrent/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace bifcurrent;

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov exponents and bifurcation currents for surface group representations"};
  app.require_subcommand(1);

  struct Run {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string out;
  };
  std::vector<std::pair<CLI::App*, std::string>> pipelines;
  Run run;
  for (const char* name : {"lyapunov", "discretize", "brownian", "grid", "divisor", "equidist", "census", "enumerate"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " pipeline");
    sub->add_option("--config", run.config_file, "JSON config file (defaults apply to missing keys)");
    sub->add_option("--seed", run.seed, "master seed (overrides the config)");
    sub->add_option("--out", run.out, "output directory (overrides the config)");
    pipelines.emplace_back(sub, name);
  }

  std::string manifest_file, rerun_out = "rerun";
  auto* rr = app.add_subcommand("rerun", "re-execute a manifest and compare output digests");
  rr->add_option("--manifest", manifest_file)->required()->check(CLI::ExistingFile);
  rr->add_option("--out", rerun_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rr->parsed()) {
      const auto r = rerun(manifest_file, rerun_out);
      if (!r.manifest.ok) {
        std::cerr << "rerun failed: " << r.manifest.error.dump() << "\n";
        return 2;
      }
      for (const auto& m : r.mismatches) std::cout << "mismatch " << m << "\n";
      std::cout << (r.identical ? "identical" : "differs") << "\n";
      return r.identical ? 0 : 1;
    }
    for (const auto& [sub, name] : pipelines) {
      if (!sub->parsed()) continue;
      ExperimentConfig cfg = run.config_file.empty() ? ExperimentConfig{} : load_config(run.config_file);
      cfg.pipeline = name;
      if (run.seed) cfg.master_seed = *run.seed;
      if (!run.out.empty()) cfg.output_dir = run.out;
      const auto m = run_experiment(cfg);
      if (!m.ok) {
        std::cerr << name << " failed: " << m.error.dump() << "\n";
        return 2;
      }
      for (const auto& [file, digest] : m.outputs) std::cout << (cfg.output_dir / file).string() << "  " << digest << "\n";
      std::cout << "wall clock " << m.wall_clock_seconds << " s, " << m.workers << " workers\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
