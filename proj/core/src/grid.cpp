#include "orthoflow/grid.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace orthoflow {

Box Box::make(std::vector<double> lo, std::vector<double> hi) {
  if (lo.size() != hi.size() || lo.empty() || lo.size() > 3) {
    throw std::invalid_argument("Box: lower/upper must have equal length in {1,2,3}");
  }
  Box b;
  b.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<long>(lo.size()));
  b.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<long>(hi.size()));
  for (int i = 0; i < b.dim(); ++i) {
    if (!(b.lower[i] < b.upper[i])) {
      throw std::invalid_argument("Box: lower[i] < upper[i] required");
    }
  }
  return b;
}

TensorGrid::TensorGrid(Box box, std::vector<int> cells_per_dim)
    : box_(std::move(box)), cells_(std::move(cells_per_dim)) {
  if (static_cast<int>(cells_.size()) != box_.dim()) {
    throw std::invalid_argument("TensorGrid: cells_per_dim length must equal box dimension");
  }
  num_nodes_ = 1;
  for (int i = 0; i < box_.dim(); ++i) {
    if (cells_[i] < 2) {
      throw std::invalid_argument("TensorGrid: need at least 2 cells per axis (no interior nodes otherwise)");
    }
    nodes_per_dim_.push_back(cells_[i] - 1);
    spacing_.push_back((box_.upper[i] - box_.lower[i]) / cells_[i]);
    num_nodes_ *= nodes_per_dim_.back();
    mass_weight_ *= spacing_.back();
  }
}

double TensorGrid::min_spacing() const {
  double h = spacing_[0];
  for (double s : spacing_) h = std::min(h, s);
  return h;
}

long TensorGrid::flat_index(const std::vector<int>& multi) const {
  long flat = 0;
  for (int i = 0; i < dim(); ++i) {
    if (multi[i] < 0 || multi[i] >= nodes_per_dim_[i]) {
      throw std::out_of_range("TensorGrid: multi-index out of range");
    }
    flat = flat * nodes_per_dim_[i] + multi[i];
  }
  return flat;
}

std::vector<int> TensorGrid::multi_index(long flat) const {
  if (flat < 0 || flat >= num_nodes_) throw std::out_of_range("TensorGrid: flat index out of range");
  std::vector<int> multi(dim());
  for (int i = dim() - 1; i >= 0; --i) {
    multi[i] = static_cast<int>(flat % nodes_per_dim_[i]);
    flat /= nodes_per_dim_[i];
  }
  return multi;
}

Eigen::VectorXd TensorGrid::node(long flat) const {
  auto multi = multi_index(flat);
  Eigen::VectorXd x(dim());
  for (int i = 0; i < dim(); ++i) {
    x[i] = box_.lower[i] + (multi[i] + 1) * spacing_[i];
  }
  return x;
}

Potential Potential::harmonic() {
  Potential p;
  p.kind = Kind::Harmonic;
  return p;
}

Potential Potential::coulomb(double cap) {
  Potential p;
  p.kind = Kind::Coulomb;
  p.cap = cap;
  return p;
}

Potential Potential::constant(double value) {
  Potential p;
  p.kind = Kind::Constant;
  p.constant_value = value;
  return p;
}

Potential Potential::custom_fn(std::function<double(const Eigen::VectorXd&)> f) {
  Potential p;
  p.kind = Kind::Custom;
  p.custom = std::move(f);
  return p;
}

double Potential::evaluate(const Eigen::VectorXd& x, double min_spacing) const {
  switch (kind) {
    case Kind::Harmonic:
      return 0.5 * x.squaredNorm();
    case Kind::Coulomb: {
      const double r0 = coulomb_r0_scale * min_spacing;
      const double r = std::max(x.norm(), r0);
      return std::max(-1.0 / r, -cap);
    }
    case Kind::Constant:
      return constant_value;
    case Kind::Custom:
      return std::max(custom(x), -cap);
  }
  return 0.0;
}

Eigen::VectorXd eval_potential(const TensorGrid& grid, const Potential& pot) {
  Eigen::VectorXd v(grid.num_nodes());
  const double h = grid.min_spacing();
  for (long j = 0; j < grid.num_nodes(); ++j) {
    const double val = pot.evaluate(grid.node(j), h);
    if (!std::isfinite(val)) {
      std::ostringstream msg;
      msg << "eval_potential: non-finite value at node " << j;
      throw std::runtime_error(msg.str());
    }
    v[j] = val;
  }
  return v;
}

}  // namespace orthoflow
