// ldc command line: run experiments, ablations, projections, and the
// finite-difference gradient audit.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ldc/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Learnable distribution calibration laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 1;

  CLI::App* run = app.add_subcommand("run", "Full multi-session benchmark over methods x seeds");
  run->add_option("--config", config_path, "key = value config file")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--seeds", seeds, "seed list override");
  // Accepted for interface compatibility; cells execute sequentially so
  // results are reproducible with or without LDC_DETERMINISTIC=1.
  run->add_option("--threads", threads, "worker cap (runs are sequential)");

  std::string which;
  CLI::App* ablate = app.add_subcommand("ablate", "One-factor ablation sweeps");
  ablate->add_option("which", which, "sampler|recurrent|divergence|outlier|memory")->required();
  ablate->add_option("--config", config_path, "key = value config file")->required();
  ablate->add_option("--out", out_dir, "output directory override");

  std::vector<std::string> inputs;
  std::string out_path = "projection.csv";
  CLI::App* project = app.add_subcommand("project", "Top-2 PCA projection of embedding files");
  project->add_option("inputs", inputs, "embedding files (binary or csv)")->required();
  project->add_option("--out", out_path, "output csv path");

  std::uint64_t gc_seed = 0;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference audit of every gradient path");
  gradcheck->add_option("--seed", gc_seed, "probe seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return ldc::cmd_run(config_path, out_dir, seeds);
  if (ablate->parsed()) return ldc::cmd_ablate(which, config_path, out_dir);
  if (project->parsed()) return ldc::cmd_project(inputs, out_path);
  if (gradcheck->parsed()) return ldc::cmd_gradcheck(gc_seed);
  return 2;
}
