#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <span>
#include <vector>

#include "dyadlab/lattice.hpp"

namespace dyadlab {

/// A nonnegative mass on every leaf cell, with subtree sums cached for every
/// active cube. Zero masses are allowed.
class MeasureGrid {
 public:
  MeasureGrid(LatticePtr lattice, Eigen::VectorXd leaf_mass);

  const Lattice& lattice() const { return *lattice_; }
  const LatticePtr& lattice_ptr() const { return lattice_; }
  const Eigen::VectorXd& leaf_mass() const { return leaf_mass_; }
  std::size_t size() const { return static_cast<std::size_t>(leaf_mass_.size()); }

  double mass(CubeId id) const { return cube_mass_[id]; }
  /// Mass of any grid cube at or above the leaf level; 0 outside the support.
  double mass(const Cube& q) const;
  double total() const;

  /// Leaf masses divided by the leaf volume.
  Eigen::VectorXd density() const;

 private:
  LatticePtr lattice_;
  Eigen::VectorXd leaf_mass_;
  std::vector<double> cube_mass_;
};

/// A real value per leaf cell: the finite model of L^2(mu).
struct GridFunction {
  LatticePtr lattice;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(LatticePtr lat, Eigen::VectorXd v);
  static GridFunction zeros(LatticePtr lat);
  static GridFunction indicator(LatticePtr lat, CubeId q);
};

/// Orthonormal basis (in L^2(mu)) of the mu-Haar functions on one cube.
struct WeightedHaarBasis {
  CubeId cube = 0;
  std::vector<GridFunction> elements;
};

struct MartingaleDecomposition {
  /// Delta_Q f for every active non-leaf Q, in cube-id order.
  std::vector<std::pair<CubeId, GridFunction>> differences;
  /// E_R f for every root R.
  std::vector<std::pair<CubeId, GridFunction>> root_averages;

  GridFunction reconstruct() const;
};

double inner(const MeasureGrid& mu, const GridFunction& f, const GridFunction& g);
double norm_squared(const MeasureGrid& mu, const GridFunction& f);

/// mu(Q)^{-1} * integral of f over Q; 0 when mu(Q) = 0.
double average(const MeasureGrid& mu, const GridFunction& f, CubeId q);

/// Delta_Q f: on each child c of Q, average(c) - average(Q); zero off Q.
GridFunction martingale_difference(const MeasureGrid& mu, const GridFunction& f, CubeId q);

WeightedHaarBasis weighted_haar_basis(const MeasureGrid& mu, CubeId q);

MartingaleDecomposition martingale_decompose(const MeasureGrid& mu, const GridFunction& f);

/// Orthonormal mean-zero vectors over the children of a cube, one column per
/// basis element, built by Gram-Schmidt in lexicographic child order. Children
/// with zero mass are skipped (their entries are 0). Each column is negative on
/// the earlier children and positive on the newly added one.
Eigen::MatrixXd child_haar_vectors(std::span<const double> child_masses);

/// Label of one column of a HaarSystem.
struct BasisLabel {
  static constexpr int kRootIndicator = -1;
  CubeId cube = 0;
  int component = 0;  // kRootIndicator for the normalized indicator of a root
  bool is_root_indicator() const { return component == kRootIndicator; }
};

/// All mu-Haar functions of the lattice plus the normalized root indicators,
/// as columns of a sparse leaf-by-basis matrix. Under Lebesgue leaf masses this
/// is an orthonormal basis of the whole leaf space.
struct HaarSystem {
  Eigen::SparseMatrix<double> basis;
  std::vector<BasisLabel> labels;
};

HaarSystem weighted_haar_system(const MeasureGrid& mu);

/// The unweighted (Lebesgue) Haar system. Column order: components of every
/// non-leaf cube in id order, then one indicator per root.
HaarSystem lebesgue_haar_system(const LatticePtr& lattice);

/// Position of (cube, component) in lebesgue_haar_system; component may be
/// BasisLabel::kRootIndicator for a root.
std::size_t lebesgue_slot(const Lattice& lattice, CubeId cube, int component);
BasisLabel lebesgue_label(const Lattice& lattice, std::size_t slot);

/// Conditional expectations on the cubes of one depth, as a leaf vector:
/// every leaf gets the mu-average of f over its depth-t ancestor.
Eigen::VectorXd level_average(const MeasureGrid& mu, const Eigen::VectorXd& f, int t);

/// Integral of f against mu over every active cube, indexed by cube id.
std::vector<double> cube_integrals(const MeasureGrid& mu, const Eigen::VectorXd& f);

}  // namespace dyadlab
