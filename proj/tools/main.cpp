#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "orthoflow/experiment.hpp"

namespace {

constexpr const char* kConfigHelp = R"(Config format (TOML-compatible subset):

  [problem]
  preset = "oscillator2d"     # oscillator1d | oscillator2d | hydrogen3d | custom
  box_lower = [-5.5, -5.5]    # required unless a preset supplies it
  box_upper = [5.5, 5.5]
  cells = [128, 128]          # cells per axis; interior nodes carry unknowns
  potential = "harmonic"      # harmonic | coulomb | constant
  c_lap = 0.5                 # Laplacian coefficient
  shift = 0.0                 # spectral shift sigma

  [solver]
  backend = "direct"          # direct (sparse Cholesky) | cg
  cg_rel_tol = 1e-12

  [flow]
  n_orbitals = 15
  tau = 0.05
  tol = 1e-10                 # relative-energy stopping tolerance
  max_iter = 100000
  seed = 1

  [output]
  dir = "out"
  replay_err_u = false        # second deterministic pass recording err_U
  reference_pack = ""         # path to a saved reference for err_i columns

Preset keys are applied first; any other key overrides the preset.
Unknown keys are errors.)";

orthoflow::ExperimentConfig load(const std::string& path, const std::string& output_dir) {
  orthoflow::ExperimentConfig config = orthoflow::parse_config_file(path);
  if (!output_dir.empty()) config.output_dir = output_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eigenpair computation via an orthogonality-preserving gradient flow"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);

  std::string config_path, output_dir, run_dir, pack_path;
  std::vector<double> taus;

  auto* run = app.add_subcommand("run", "Run the flow iteration for a config file");
  run->add_option("config", config_path, "Path to the config file")->required();
  run->add_option("--output-dir", output_dir, "Override [output] dir");

  auto* sweep = app.add_subcommand("sweep-tau", "Run the same problem for several time steps");
  sweep->add_option("config", config_path, "Path to the config file")->required();
  sweep->add_option("--taus", taus, "Comma-separated time steps")
      ->required()
      ->delimiter(',');
  sweep->add_option("--output-dir", output_dir, "Override [output] dir");

  auto* ref = app.add_subcommand("reference", "Compute and save a reference eigenpair pack");
  ref->add_option("config", config_path, "Path to the config file")->required();
  ref->add_option("--output-dir", output_dir, "Override [output] dir");

  auto* cmp = app.add_subcommand("compare", "Compare a finished run against a reference pack");
  cmp->add_option("run_dir", run_dir, "Directory written by 'run'")->required();
  cmp->add_option("pack", pack_path, "Reference pack file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return orthoflow::run_experiment(load(config_path, output_dir));
    if (sweep->parsed()) return orthoflow::sweep_tau(load(config_path, output_dir), taus);
    if (ref->parsed()) return orthoflow::make_reference(load(config_path, output_dir));
    return orthoflow::compare_reference(run_dir, pack_path);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return orthoflow::kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return orthoflow::kExitNumericalAbort;
  }
}
