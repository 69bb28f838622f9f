#pragma once

#include <string>
#include <vector>

#include "orthoflow/flow.hpp"
#include "orthoflow/grid.hpp"
#include "orthoflow/hamiltonian.hpp"
#include "orthoflow/oracle.hpp"

namespace orthoflow {

/// Process exit codes shared by every CLI verb.
enum ExitCode : int {
  kExitConverged = 0,
  kExitMaxIter = 2,
  kExitInvalidConfig = 3,
  kExitNumericalAbort = 4,
};

struct ExperimentConfig {
  // [problem]
  std::string preset = "custom";  // oscillator1d | oscillator2d | hydrogen3d | custom
  std::vector<double> box_lower, box_upper;
  std::vector<int> cells;
  std::string potential = "harmonic";  // harmonic | coulomb | constant
  double potential_constant = 0.0;
  double c_lap = 1.0;
  double shift = 0.0;

  // [solver]
  std::string backend = "direct";  // direct | cg
  double cg_rel_tol = 1e-12;
  int cg_max_iter = 10000;

  // [flow]
  int n_orbitals = 1;
  double tau = 0.1;
  double tol = 1e-10;
  long max_iter = 100000;
  unsigned long long seed = 1;
  double ortho_alarm = 1e-8;

  // [output]
  std::string output_dir = "out";
  bool records_csv = true;
  bool summary_json = true;
  bool eigenvalues_csv = true;
  bool save_final = true;
  bool replay_err_u = false;       // second deterministic pass filling err_U
  std::string reference_pack;      // optional path to a saved reference
};

/// Named preset parameter sets; throws on unknown name ("custom" is
/// not instantiable without a config file).
ExperimentConfig preset_config(const std::string& name);

/// TOML-compatible subset: [problem]/[solver]/[flow]/[output] sections,
/// key = value lines, numbers, booleans, quoted strings and flat
/// arrays. Unknown sections or keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Validated problem assembly shared by all verbs.
TensorGrid make_grid(const ExperimentConfig& config);
Hamiltonian make_hamiltonian(const ExperimentConfig& config);
GreenSolver make_solver(const ExperimentConfig& config, const Hamiltonian& H);
FlowConfig make_flow_config(const ExperimentConfig& config);

/// Full run: flow iteration, optional replay pass for err_U, output
/// files (records.csv, summary.json, eigenvalues.csv, u_end.txt) in
/// output_dir. Returns kExitConverged or kExitMaxIter; configuration
/// and numerical failures surface as exceptions for the CLI to map.
int run_experiment(const ExperimentConfig& config);

/// One run per tau in its own subdirectory plus a combined sweep.csv
/// comparing eigenvalues (and errors, when a reference is configured).
int sweep_tau(const ExperimentConfig& config, const std::vector<double>& taus);

/// Computes and saves a reference pack (reference.pack in output_dir).
int make_reference(const ExperimentConfig& config);

/// Re-evaluates a finished run directory against a reference pack and
/// appends the comparison to its summary.json.
int compare_reference(const std::string& run_dir, const std::string& pack_path);

/// Final-iterate serialization (text, versioned like reference packs).
void save_orbitals(const std::string& path, const Orbitals& U);
Orbitals load_orbitals(const std::string& path);

}  // namespace orthoflow
