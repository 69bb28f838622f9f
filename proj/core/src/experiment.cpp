#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "orthoflow/diagnostics.hpp"
#include "orthoflow/experiment.hpp"

namespace orthoflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSummarySchemaVersion = 1;

json config_json(const ExperimentConfig& c) {
  json j;
  j["problem"] = {{"preset", c.preset},
                  {"box_lower", c.box_lower},
                  {"box_upper", c.box_upper},
                  {"cells", c.cells},
                  {"potential", c.potential},
                  {"potential_constant", c.potential_constant},
                  {"c_lap", c.c_lap},
                  {"shift", c.shift}};
  j["solver"] = {{"backend", c.backend},
                 {"cg_rel_tol", c.cg_rel_tol},
                 {"cg_max_iter", c.cg_max_iter}};
  j["flow"] = {{"n_orbitals", c.n_orbitals},
               {"tau", c.tau},
               {"tol", c.tol},
               {"max_iter", c.max_iter},
               {"seed", c.seed},
               {"ortho_alarm", c.ortho_alarm},
               {"init_distribution", "standard normal per entry, then orthonormalized"}};
  j["output"] = {{"dir", c.output_dir},
                 {"replay_err_u", c.replay_err_u},
                 {"reference_pack", c.reference_pack}};
  return j;
}

void write_records_csv(const std::string& path, const std::vector<RunRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "n,t,energy,energy_shift_corrected,err_E,ortho_err,err_U,dist_class_a,delta_L2\n";
  out << std::setprecision(17);
  for (const auto& r : history) {
    out << r.n << ',' << r.t << ',' << r.energy << ',' << r.energy_shift_corrected << ','
        << r.err_E << ',' << r.ortho_err << ',';
    if (r.err_U) out << *r.err_U;
    out << ',';
    if (r.dist_class_a) out << *r.dist_class_a;
    out << ',';
    if (r.delta_L2) out << *r.delta_L2;
    out << '\n';
  }
}

void write_eigenvalues_csv(const std::string& path, const Eigen::VectorXd& lambda,
                           const ReferencePack* pack) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "i,lambda,lambda_ref,err_i\n";
  out << std::setprecision(17);
  for (long i = 0; i < lambda.size(); ++i) {
    out << (i + 1) << ',' << lambda[i] << ',';
    if (pack && i < pack->lambda.size()) {
      const double ref = pack->lambda[i];
      out << ref << ',' << std::abs(lambda[i] - ref) / std::abs(ref);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

json rate_fit_json(const RateFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"window", f.window},
          {"r_squared", f.r_squared},
          {"samples", f.samples}};
}

/// Rate fits over the recorded history; missing series are skipped.
json rate_fits_json(const std::vector<RunRecord>& history) {
  json j = json::object();
  std::vector<double> err_E, err_U, dist_a;
  for (const auto& r : history) {
    err_E.push_back(r.err_E);
    if (r.err_U) err_U.push_back(*r.err_U);
    if (r.dist_class_a) dist_a.push_back(*r.dist_class_a);
  }
  auto put = [&j](const char* name, const std::vector<double>& s) {
    if (s.size() < 20) return;
    try {
      j[name] = rate_fit_json(fit_rate(s));
    } catch (const std::exception&) {
      // too few positive samples in the window; leave the field out
    }
  };
  put("err_E", err_E);
  put("err_U", err_U);
  put("dist_class_a", dist_a);
  return j;
}

json reference_json(const Hamiltonian& H, const Orbitals& U_end, const Eigen::VectorXd& lambda,
                    const ReferencePack& pack) {
  json j;
  j["lambda_ref"] = std::vector<double>(pack.lambda.data(), pack.lambda.data() + pack.lambda.size());
  std::vector<double> err_i;
  for (long i = 0; i < lambda.size() && i < pack.lambda.size(); ++i) {
    err_i.push_back(std::abs(lambda[i] - pack.lambda[i]) / std::abs(pack.lambda[i]));
  }
  j["err_i"] = err_i;
  j["e_gs"] = pack.e_gs;
  j["e_es"] = pack.e_es;
  j["lambda_np1"] = pack.lambda_np1;
  const auto d = subspace_distances(H, U_end, pack);
  j["delta_L2"] = d.delta_L2;
  j["delta_H1"] = d.delta_H1;
  j["dist_class_L2"] = d.dist_class_L2;
  j["dist_class_a"] = d.dist_class_a;
  std::vector<double> angles(d.angles.data(), d.angles.data() + d.angles.size());
  j["principal_angles"] = angles;
  return j;
}

void check_pack_matches(const ExperimentConfig& c, const ReferencePack& pack) {
  const bool grid_ok = pack.dim == static_cast<int>(c.cells.size()) && pack.cells == c.cells;
  if (!grid_ok || pack.lambda.size() != c.n_orbitals) {
    throw std::invalid_argument(
        "reference pack does not match the configured grid or orbital count");
  }
}

struct RunOutput {
  RunResult result;
  Eigen::VectorXd lambda;
  double wall_time_s = 0.0;
};

/// Flow run plus the optional deterministic replay pass that fills
/// err_U against the first pass's final iterate.
RunOutput execute(const ExperimentConfig& config, const Hamiltonian& H,
                  const GreenSolver& solver, const ReferencePack* pack) {
  const auto t0 = std::chrono::steady_clock::now();
  const FlowConfig fc = make_flow_config(config);
  const Orbitals U0 = random_orthonormal_init(H.grid, config.n_orbitals, config.seed);

  StepObserver observer;
  if (pack) observer = make_reference_observer(H, *pack);

  RunOutput out;
  out.result = flow_run(fc, H, solver, U0, observer);

  if (config.replay_err_u) {
    const StepObserver replay =
        make_replay_observer(H.grid, out.result.final_state.U, /*with_columns=*/true);
    StepObserver combined;
    if (pack) {
      const StepObserver ref = make_reference_observer(H, *pack);
      combined = [replay, ref](const Orbitals& U, RunRecord& rec) {
        replay(U, rec);
        ref(U, rec);
      };
    } else {
      combined = replay;
    }
    RunResult second = flow_run(fc, H, solver, U0, combined);
    if (second.iterations != out.result.iterations) {
      throw std::runtime_error("replay pass diverged from the first pass (non-determinism)");
    }
    out.result.history = std::move(second.history);
  }

  out.lambda = extract_eigenvalues(out.result.final_state.U, H, solver);
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

json summary_json_for(const ExperimentConfig& config, const Hamiltonian& H,
                      const RunOutput& out, const ReferencePack* pack) {
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["code_version"] = "orthoflow 0.1.0";
  j["config"] = config_json(config);
  j["converged"] = out.result.converged;
  j["iterations"] = out.result.iterations;
  j["wall_time_s"] = out.wall_time_s;
  j["energy"] = {{"raw", out.result.final_state.energy_raw},
                 {"shift_corrected", out.result.final_state.energy_shift_corrected}};
  j["final_err_E"] = out.result.final_state.err_E;
  j["final_ortho_err"] = out.result.final_state.ortho_err;
  j["max_ortho_err"] = out.result.max_ortho_err;
  j["reortho_calls_in_loop"] = out.result.reortho_calls_in_loop;
  j["eigenvalues"] =
      std::vector<double>(out.lambda.data(), out.lambda.data() + out.lambda.size());
  j["rate_fits"] = rate_fits_json(out.result.history);
  if (pack) j["reference"] = reference_json(H, out.result.final_state.U, out.lambda, *pack);
  return j;
}

void write_outputs(const ExperimentConfig& config, const std::string& dir,
                   const Hamiltonian& H, const RunOutput& out, const ReferencePack* pack) {
  fs::create_directories(dir);
  if (config.records_csv) write_records_csv(dir + "/records.csv", out.result.history);
  if (config.eigenvalues_csv) {
    write_eigenvalues_csv(dir + "/eigenvalues.csv", out.lambda, pack);
  }
  if (config.save_final) save_orbitals(dir + "/u_end.txt", out.result.final_state.U);
  if (config.summary_json) {
    std::ofstream js(dir + "/summary.json");
    if (!js) throw std::runtime_error("cannot open " + dir + "/summary.json");
    js << summary_json_for(config, H, out, pack).dump(2) << '\n';
  }
}

}  // namespace

int run_experiment(const ExperimentConfig& config) {
  const Hamiltonian H = make_hamiltonian(config);
  const GreenSolver solver = make_solver(config, H);

  ReferencePack pack;
  const bool have_pack = !config.reference_pack.empty();
  if (have_pack) {
    pack = load_pack(config.reference_pack);
    check_pack_matches(config, pack);
  }

  const RunOutput out = execute(config, H, solver, have_pack ? &pack : nullptr);
  write_outputs(config, config.output_dir, H, out, have_pack ? &pack : nullptr);
  return out.result.converged ? kExitConverged : kExitMaxIter;
}

int sweep_tau(const ExperimentConfig& config, const std::vector<double>& taus) {
  if (taus.empty()) throw std::invalid_argument("sweep_tau: need at least one tau");
  const Hamiltonian H = make_hamiltonian(config);
  const GreenSolver solver = make_solver(config, H);

  ReferencePack pack;
  const bool have_pack = !config.reference_pack.empty();
  if (have_pack) {
    pack = load_pack(config.reference_pack);
    check_pack_matches(config, pack);
  }

  std::vector<RunOutput> outs;
  int exit_code = kExitConverged;
  for (double tau : taus) {
    ExperimentConfig c = config;
    c.tau = tau;
    std::ostringstream sub;
    sub << config.output_dir << "/tau_" << tau;
    c.output_dir = sub.str();
    const RunOutput out = execute(c, H, solver, have_pack ? &pack : nullptr);
    write_outputs(c, c.output_dir, H, out, have_pack ? &pack : nullptr);
    if (!out.result.converged) exit_code = kExitMaxIter;
    outs.push_back(out);
  }

  fs::create_directories(config.output_dir);
  std::ofstream out(config.output_dir + "/sweep.csv");
  if (!out) throw std::runtime_error("cannot open " + config.output_dir + "/sweep.csv");
  out << std::setprecision(17);
  out << "i";
  for (double tau : taus) out << ",lambda_tau_" << tau;
  if (have_pack) {
    out << ",lambda_ref";
    for (double tau : taus) out << ",err_tau_" << tau;
  }
  out << "\n";
  for (int i = 0; i < config.n_orbitals; ++i) {
    out << (i + 1);
    for (const auto& o : outs) out << ',' << o.lambda[i];
    if (have_pack) {
      out << ',' << pack.lambda[i];
      for (const auto& o : outs) {
        out << ',' << std::abs(o.lambda[i] - pack.lambda[i]) / std::abs(pack.lambda[i]);
      }
    }
    out << '\n';
  }
  out << "iterations";
  for (const auto& o : outs) out << ',' << o.result.iterations;
  out << '\n';
  return exit_code;
}

int make_reference(const ExperimentConfig& config) {
  const Hamiltonian H = make_hamiltonian(config);
  const GreenSolver solver = make_solver(config, H);
  const OracleMode mode = H.size() <= 4000 ? OracleMode::Dense : OracleMode::Iterative;
  const ReferencePack pack = reference_eigenpairs(H, solver, config.n_orbitals, mode);
  fs::create_directories(config.output_dir);
  save_pack(config.output_dir + "/reference.pack", pack);
  return kExitConverged;
}

int compare_reference(const std::string& run_dir, const std::string& pack_path) {
  const std::string summary_path = run_dir + "/summary.json";
  std::ifstream in(summary_path);
  if (!in) throw std::invalid_argument("compare: cannot open " + summary_path);
  json summary = json::parse(in);
  in.close();

  const ReferencePack pack = load_pack(pack_path);
  const ExperimentConfig config = [&] {
    // Rebuild the problem from the config echo in summary.json.
    ExperimentConfig c;
    const json& p = summary.at("config").at("problem");
    c.preset = p.at("preset").get<std::string>();
    c.box_lower = p.at("box_lower").get<std::vector<double>>();
    c.box_upper = p.at("box_upper").get<std::vector<double>>();
    c.cells = p.at("cells").get<std::vector<int>>();
    c.potential = p.at("potential").get<std::string>();
    c.potential_constant = p.at("potential_constant").get<double>();
    c.c_lap = p.at("c_lap").get<double>();
    c.shift = p.at("shift").get<double>();
    const json& f = summary.at("config").at("flow");
    c.n_orbitals = f.at("n_orbitals").get<int>();
    return c;
  }();
  check_pack_matches(config, pack);

  const Orbitals U_end = load_orbitals(run_dir + "/u_end.txt");
  if (U_end.cols() != pack.lambda.size()) {
    throw std::invalid_argument("compare: stored run and pack have different orbital counts");
  }
  const Hamiltonian H = make_hamiltonian(config);
  const GreenSolver solver = make_solver(config, H);
  const Eigen::VectorXd lambda = extract_eigenvalues(U_end, H, solver);

  summary["reference"] = reference_json(H, U_end, lambda, pack);
  std::ofstream out_s(summary_path);
  if (!out_s) throw std::runtime_error("compare: cannot rewrite " + summary_path);
  out_s << summary.dump(2) << '\n';

  write_eigenvalues_csv(run_dir + "/eigenvalues.csv", lambda, &pack);
  return kExitConverged;
}

void save_orbitals(const std::string& path, const Orbitals& U) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_orbitals: cannot open " + path);
  out << "orthoflow-orbitals 1\n" << U.rows() << ' ' << U.cols() << '\n';
  out << std::setprecision(17);
  for (long r = 0; r < U.rows(); ++r) {
    for (long c = 0; c < U.cols(); ++c) {
      out << U(r, c) << (c + 1 == U.cols() ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("save_orbitals: write failed for " + path);
}

Orbitals load_orbitals(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_orbitals: cannot open " + path);
  std::string tag;
  int version = 0;
  long rows = 0, cols = 0;
  in >> tag >> version >> rows >> cols;
  if (tag != "orthoflow-orbitals" || version != 1 || rows < 1 || cols < 1) {
    throw std::runtime_error("load_orbitals: unrecognized format in " + path);
  }
  Orbitals U(rows, cols);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) in >> U(r, c);
  }
  if (!in) throw std::runtime_error("load_orbitals: truncated file " + path);
  return U;
}

}  // namespace orthoflow
