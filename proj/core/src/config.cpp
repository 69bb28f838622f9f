#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "orthoflow/experiment.hpp"

namespace orthoflow {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

double to_number(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("");
    return x;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

long to_integer(const std::string& key, const std::string& v) {
  const double x = to_number(key, v);
  const long i = static_cast<long>(x);
  if (static_cast<double>(i) != x) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config: key '" + key + "' expects true or false, got '" + v + "'");
}

std::string to_string_value(const std::string& key, const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && v.find_first_of(" \t\"[]") == std::string::npos) return v;  // bare word
  throw ConfigError("config: key '" + key + "' expects a string, got '" + v + "'");
}

std::vector<std::string> split_array(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ConfigError("config: key '" + key + "' expects an array like [a, b]");
  }
  std::vector<std::string> out;
  std::string inner = v.substr(1, v.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("config: key '" + key + "' has an empty array element");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' array must be non-empty");
  return out;
}

std::vector<double> to_double_array(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_array(key, v)) out.push_back(to_number(key, s));
  return out;
}

std::vector<int> to_int_array(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_array(key, v)) out.push_back(static_cast<int>(to_integer(key, s)));
  return out;
}

void apply_key(ExperimentConfig& c, const std::string& section, const std::string& key,
               const std::string& value) {
  const std::string full = section + "." + key;
  if (section == "problem") {
    if (key == "preset") c.preset = to_string_value(full, value);
    else if (key == "box_lower") c.box_lower = to_double_array(full, value);
    else if (key == "box_upper") c.box_upper = to_double_array(full, value);
    else if (key == "cells") c.cells = to_int_array(full, value);
    else if (key == "potential") c.potential = to_string_value(full, value);
    else if (key == "potential_constant") c.potential_constant = to_number(full, value);
    else if (key == "c_lap") c.c_lap = to_number(full, value);
    else if (key == "shift") c.shift = to_number(full, value);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "solver") {
    if (key == "backend") c.backend = to_string_value(full, value);
    else if (key == "cg_rel_tol") c.cg_rel_tol = to_number(full, value);
    else if (key == "cg_max_iter") c.cg_max_iter = static_cast<int>(to_integer(full, value));
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "flow") {
    if (key == "n_orbitals") c.n_orbitals = static_cast<int>(to_integer(full, value));
    else if (key == "tau") c.tau = to_number(full, value);
    else if (key == "tol") c.tol = to_number(full, value);
    else if (key == "max_iter") c.max_iter = to_integer(full, value);
    else if (key == "seed") c.seed = static_cast<unsigned long long>(to_integer(full, value));
    else if (key == "ortho_alarm") c.ortho_alarm = to_number(full, value);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else if (section == "output") {
    if (key == "dir") c.output_dir = to_string_value(full, value);
    else if (key == "records_csv") c.records_csv = to_bool(full, value);
    else if (key == "summary_json") c.summary_json = to_bool(full, value);
    else if (key == "eigenvalues_csv") c.eigenvalues_csv = to_bool(full, value);
    else if (key == "save_final") c.save_final = to_bool(full, value);
    else if (key == "replay_err_u") c.replay_err_u = to_bool(full, value);
    else if (key == "reference_pack") c.reference_pack = to_string_value(full, value);
    else throw ConfigError("config: unknown key '" + full + "'");
  } else {
    throw ConfigError("config: unknown section '[" + section + "]'");
  }
}

void validate(const ExperimentConfig& c) {
  if (c.box_lower.empty() || c.box_lower.size() != c.box_upper.size()) {
    throw ConfigError("config: box_lower and box_upper must be set with equal lengths");
  }
  if (c.cells.size() != c.box_lower.size()) {
    throw ConfigError("config: cells must match the box dimension");
  }
  if (c.box_lower.size() > 3) throw ConfigError("config: dimension must be 1, 2 or 3");
  for (size_t i = 0; i < c.box_lower.size(); ++i) {
    if (!(c.box_lower[i] < c.box_upper[i])) {
      throw ConfigError("config: box_lower must be strictly below box_upper");
    }
    if (c.cells[i] < 2) throw ConfigError("config: need at least 2 cells per axis");
  }
  if (c.potential != "harmonic" && c.potential != "coulomb" && c.potential != "constant") {
    throw ConfigError("config: potential must be harmonic, coulomb or constant");
  }
  if (c.backend != "direct" && c.backend != "cg") {
    throw ConfigError("config: solver backend must be direct or cg");
  }
  if (c.c_lap <= 0) throw ConfigError("config: c_lap must be positive");
  if (c.n_orbitals < 1) throw ConfigError("config: n_orbitals must be at least 1");
  if (c.tau <= 0) throw ConfigError("config: tau must be positive");
  if (c.tol <= 0) throw ConfigError("config: tol must be positive");
  if (c.max_iter < 1) throw ConfigError("config: max_iter must be at least 1");
  if (c.output_dir.empty()) throw ConfigError("config: output dir must be non-empty");
}

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "oscillator1d") {
    c.box_lower = {-8.0};
    c.box_upper = {8.0};
    c.cells = {256};
    c.potential = "harmonic";
    c.c_lap = 0.5;
    c.n_orbitals = 4;
    c.tau = 0.1;
  } else if (name == "oscillator2d") {
    c.box_lower = {-5.5, -5.5};
    c.box_upper = {5.5, 5.5};
    c.cells = {128, 128};
    c.potential = "harmonic";
    c.c_lap = 0.5;
    c.n_orbitals = 15;
    c.tau = 0.05;
  } else if (name == "hydrogen3d") {
    c.box_lower = {-20.0, -20.0, -20.0};
    c.box_upper = {20.0, 20.0, 20.0};
    c.cells = {32, 32, 32};
    c.potential = "coulomb";
    c.c_lap = 0.5;
    c.shift = 1.0;
    c.n_orbitals = 5;
    c.tau = 1.0;
  } else {
    throw ConfigError("config: unknown preset '" + name +
                      "' (oscillator1d, oscillator2d, hydrogen3d)");
  }
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  // Collect (section, key, value) triples first so a preset key can be
  // applied before the overrides regardless of line order.
  std::vector<std::array<std::string, 3>> entries;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config: malformed section header at line " + std::to_string(lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    }
    if (section.empty()) {
      throw ConfigError("config: key outside any section at line " + std::to_string(lineno));
    }
    entries.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }

  ExperimentConfig c;
  bool have_preset = false;
  for (const auto& e : entries) {
    if (e[0] == "problem" && e[1] == "preset") {
      const std::string name = to_string_value("problem.preset", e[2]);
      if (name != "custom") c = preset_config(name);
      have_preset = true;
    }
  }
  if (!have_preset && entries.empty()) throw ConfigError("config: empty configuration");
  for (const auto& e : entries) {
    if (e[0] == "problem" && e[1] == "preset") continue;
    apply_key(c, e[0], e[1], e[2]);
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

TensorGrid make_grid(const ExperimentConfig& config) {
  return TensorGrid(Box::make(config.box_lower, config.box_upper), config.cells);
}

Hamiltonian make_hamiltonian(const ExperimentConfig& config) {
  const TensorGrid grid = make_grid(config);
  Potential pot;
  if (config.potential == "harmonic") pot = Potential::harmonic();
  else if (config.potential == "coulomb") pot = Potential::coulomb();
  else pot = Potential::constant(config.potential_constant);
  return assemble(grid, pot, config.c_lap, config.shift);
}

GreenSolver make_solver(const ExperimentConfig& config, const Hamiltonian& H) {
  const auto backend =
      config.backend == "cg" ? GreenSolver::Backend::Cg : GreenSolver::Backend::Direct;
  return GreenSolver(H, backend, config.cg_rel_tol, config.cg_max_iter);
}

FlowConfig make_flow_config(const ExperimentConfig& config) {
  FlowConfig f;
  f.n_orbitals = config.n_orbitals;
  f.tau = config.tau;
  f.tol = config.tol;
  f.max_iter = config.max_iter;
  f.seed = config.seed;
  f.ortho_alarm = config.ortho_alarm;
  return f;
}

}  // namespace orthoflow
