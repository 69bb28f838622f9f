#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace orthoflow {

/// Axis-aligned box domain in 1, 2 or 3 dimensions.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }

  static Box make(std::vector<double> lo, std::vector<double> hi);
};

/// Uniform tensor-product grid on a box with homogeneous Dirichlet
/// boundary. Only interior nodes carry unknowns: with m_i cells along
/// axis i there are m_i - 1 interior nodes, x = lower + (index+1)*h.
///
/// Flat node ordering is lexicographic with the last coordinate
/// fastest: flat = (i_0 * n_1 + i_1) * n_2 + i_2.
class TensorGrid {
 public:
  TensorGrid(Box box, std::vector<int> cells_per_dim);

  int dim() const { return box_.dim(); }
  const Box& box() const { return box_; }
  const std::vector<int>& cells() const { return cells_; }
  long num_nodes() const { return num_nodes_; }
  double spacing(int axis) const { return spacing_[axis]; }
  double min_spacing() const;

  /// Product of spacings; the diagonal mass weight h^d.
  double mass_weight() const { return mass_weight_; }

  long flat_index(const std::vector<int>& multi) const;
  std::vector<int> multi_index(long flat) const;
  Eigen::VectorXd node(long flat) const;

 private:
  Box box_;
  std::vector<int> cells_;
  std::vector<long> nodes_per_dim_;
  std::vector<double> spacing_;
  long num_nodes_ = 0;
  double mass_weight_ = 1.0;
};

/// Node-wise potential. Evaluation must be finite at every grid node;
/// the Coulomb kind regularizes its singularity with a softening
/// radius r0 (nodes closer than r0 to the nucleus see -1/r0) and a
/// global floor -cap as a safety net for custom grids.
struct Potential {
  enum class Kind { Harmonic, Coulomb, Constant, Custom };

  Kind kind = Kind::Harmonic;
  double constant_value = 0.0;
  double cap = 1e3;
  /// Coulomb softening radius as a multiple of the minimum grid
  /// spacing. 3/(2*pi) was calibrated against a grid-refinement study
  /// (docs/hydrogen_discretization.md).
  double coulomb_r0_scale = 3.0 / (2.0 * 3.14159265358979323846);
  std::function<double(const Eigen::VectorXd&)> custom;

  static Potential harmonic();
  static Potential coulomb(double cap = 1e3);
  static Potential constant(double value);
  static Potential custom_fn(std::function<double(const Eigen::VectorXd&)> f);

  double evaluate(const Eigen::VectorXd& x, double min_spacing) const;
};

/// V(x_j) for every interior node, in grid order.
Eigen::VectorXd eval_potential(const TensorGrid& grid, const Potential& pot);

}  // namespace orthoflow
